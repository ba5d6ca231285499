#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/image.hpp"

namespace sobd {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    require(f != nullptr, "cannot open file: ", path);
    return f;
}

}  // namespace detail

// Reads any PNG as 8-bit RGB (palette/gray/alpha are converted).
inline Image read_image_png(const std::string& path) {
    detail::FilePtr file = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "libpng: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("libpng: info struct allocation failed");
    }
    Image img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("failed to decode PNG: ", path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_image_png(const std::string& path, const Image& img) {
    require(img.valid(), "write_image_png: invalid image");
    detail::FilePtr file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "libpng: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("libpng: info struct allocation failed");
    }
    std::vector<png_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("failed to encode PNG: ", path);
    }
    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// 16-bit single-channel PNG. `widen8` controls how 8-bit files are read:
// id semantics keep the raw value (segment ids), intensity semantics scale
// by 257 so 255 maps to 65535.
enum class Gray16Widen { keep_value, scale_intensity };

inline std::vector<std::uint16_t> read_gray16_png(const std::string& path, int& width, int& height,
                                                  Gray16Widen widen8 = Gray16Widen::keep_value) {
    detail::FilePtr file = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "libpng: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail("libpng: info struct allocation failed");
    }
    std::vector<std::uint16_t> pixels;
    std::vector<png_bytep> rows;
    std::vector<std::uint8_t> raw;
    int bit_depth = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("failed to decode 16-bit PNG: ", path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    require(color == PNG_COLOR_TYPE_GRAY, "expected single-channel PNG: ", path);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    bit_depth = png_get_bit_depth(png, info);
    require(bit_depth == 8 || bit_depth == 16, "unsupported bit depth in ", path);
    const std::size_t stride = static_cast<std::size_t>(width) * (bit_depth / 8);
    raw.assign(stride * height, 0);
    rows.resize(height);
    for (int y = 0; y < height; ++y) rows[y] = raw.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    pixels.resize(static_cast<std::size_t>(width) * height);
    if (bit_depth == 16) {
        for (std::size_t i = 0; i < pixels.size(); ++i)  // PNG 16-bit is big-endian
            pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    } else {
        const int mul = widen8 == Gray16Widen::scale_intensity ? 257 : 1;
        for (std::size_t i = 0; i < pixels.size(); ++i)
            pixels[i] = static_cast<std::uint16_t>(raw[i] * mul);
    }
    return pixels;
}

inline void write_gray16_png(const std::string& path, int width, int height,
                             const std::uint16_t* pixels) {
    detail::FilePtr file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "libpng: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail("libpng: info struct allocation failed");
    }
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height * 2);
    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("failed to encode 16-bit PNG: ", path);
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(width) * height; ++i) {
        raw[2 * i] = static_cast<std::uint8_t>(pixels[i] >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(pixels[i] & 0xff);
    }
    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * width * 2;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// BoundaryMap <-> 16-bit PNG, value = round(p * 65535).
inline void write_boundary_map_png(const std::string& path, const BoundaryMap& map) {
    std::vector<std::uint16_t> pixels(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        const double p = std::min(1.0, std::max(0.0, static_cast<double>(map.values[i])));
        pixels[i] = static_cast<std::uint16_t>(std::lround(p * 65535.0));
    }
    write_gray16_png(path, map.width, map.height, pixels.data());
}

inline BoundaryMap read_boundary_map_png(const std::string& path) {
    int w = 0, h = 0;
    const auto pixels = read_gray16_png(path, w, h, Gray16Widen::scale_intensity);
    BoundaryMap map(w, h);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        map.values[i] = static_cast<float>(pixels[i] / 65535.0);
    return map;
}

}  // namespace sobd
