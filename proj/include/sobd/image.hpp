#pragma once

#include <cstdint>
#include <vector>

#include "sobd/base.hpp"

namespace sobd {

// Minimum image side for patch-based boundary detection (32x32 windows).
inline constexpr int kMinForestImageSide = 32;

// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // 3 * width * height

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    const std::uint8_t* pixel(int x, int y) const {
        return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    }
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
    bool valid() const {
        return width > 0 && height > 0 && rgb.size() == static_cast<std::size_t>(width) * height * 3;
    }
};

// Per-pixel segment ids plus the segment -> class mapping. Segment 0 is
// background/unlabeled and always maps to class 0.
struct LabeledSegmentation {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> segments;       // width * height, row-major
    std::vector<std::uint16_t> segment_class;  // indexed by segment id, [0] == 0

    LabeledSegmentation() = default;
    LabeledSegmentation(int w, int h)
        : width(w), height(h), segments(static_cast<std::size_t>(w) * h, 0), segment_class(1, 0) {}

    std::uint16_t segment_at(int x, int y) const {
        return segments[static_cast<std::size_t>(y) * width + x];
    }
    void set_segment(int x, int y, std::uint16_t id) {
        segments[static_cast<std::size_t>(y) * width + x] = id;
    }
    std::uint16_t class_of(std::uint16_t segment) const {
        return segment < segment_class.size() ? segment_class[segment] : 0;
    }
    std::uint16_t class_at(int x, int y) const { return class_of(segment_at(x, y)); }

    void map_segment_to_class(std::uint16_t segment, std::uint16_t cls) {
        if (segment >= segment_class.size()) segment_class.resize(segment + 1, 0);
        segment_class[segment] = cls;
    }

    // segment 0 <=> class 0, dims positive, mapping covers every used id.
    void validate() const {
        require(width > 0 && height > 0, "segmentation: empty raster");
        require(segments.size() == static_cast<std::size_t>(width) * height,
                "segmentation: pixel buffer size mismatch");
        require(!segment_class.empty() && segment_class[0] == 0,
                "segmentation: segment 0 must map to class 0");
        for (std::uint16_t id : segments) {
            if (id == 0) continue;
            require(id < segment_class.size() && segment_class[id] != 0,
                    "segmentation: segment ", id, " has no class mapping");
        }
    }
};

// Per-pixel boundary probability in [0, 1]. Stored as float; fusion and
// evaluation arithmetic runs in double.
struct BoundaryMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;  // width * height, row-major

    BoundaryMap() = default;
    BoundaryMap(int w, int h, float fill = 0.0f)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    void set(int x, int y, float v) { values[static_cast<std::size_t>(y) * width + x] = v; }
    std::size_t size() const { return values.size(); }

    bool same_shape(const BoundaryMap& o) const { return width == o.width && height == o.height; }
};

inline void require_same_shape(const BoundaryMap& a, const BoundaryMap& b, const char* what) {
    require(a.same_shape(b), what, ": dimension mismatch (", a.width, "x", a.height, " vs ",
            b.width, "x", b.height, ")");
}

}  // namespace sobd
