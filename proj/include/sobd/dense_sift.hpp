#pragma once

// Dense local gradient descriptors on a regular grid: 16x16 patches, 4x4
// spatial cells, 8 full-circle orientation bins, trilinear binning.

#include <cmath>
#include <utility>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/image.hpp"
#include "sobd/linalg.hpp"
#include "sobd/parallel.hpp"

namespace sobd {

struct SiftParams {
    int patch = 16;
    int stride = 4;
    int cells = 4;  // cells per patch side; cell side = patch / cells
    int bins = 8;   // orientation bins over the full circle
    // Per-entry clamp applied after the first L2 normalization, followed by
    // a renormalization. Non-positive disables the clamp.
    double clamp = 0.2;

    int dim() const { return cells * cells * bins; }
};

struct LocalDescriptorField {
    SiftParams params;
    int image_width = 0;
    int image_height = 0;
    std::vector<int> xs, ys;  // patch top-left corners, row-major grid order
    MatrixF descriptors;      // count x dim

    int count() const { return static_cast<int>(xs.size()); }
    int dim() const { return static_cast<int>(descriptors.cols); }
    double center_y(int i) const { return ys[i] + params.patch * 0.5; }
};

// ITU-R 601 luma.
inline std::vector<double> luminance(const Image& img) {
    std::vector<double> luma(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* p = img.pixel(x, y);
            luma[static_cast<std::size_t>(y) * img.width + x] =
                0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
    return luma;
}

inline LocalDescriptorField dense_descriptors(const Image& img, const SiftParams& params = {}) {
    require(params.patch > 0 && params.stride > 0 && params.cells > 0 && params.bins > 0,
            "dense_descriptors: bad parameters");
    require(params.patch % params.cells == 0, "dense_descriptors: patch not divisible into cells");
    require(img.width >= params.patch && img.height >= params.patch,
            "image too small for ", params.patch, "x", params.patch, " descriptor patches (",
            img.width, "x", img.height, ")");

    const int w = img.width, h = img.height;
    const std::vector<double> luma = luminance(img);
    auto lum = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return luma[static_cast<std::size_t>(y) * w + x];
    };

    // Clamped central differences; magnitude and orientation per pixel.
    std::vector<float> mag(luma.size()), ori(luma.size());
    parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const double gx = lum(x + 1, y) - lum(x - 1, y);
            const double gy = lum(x, y + 1) - lum(x, y - 1);
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            mag[i] = static_cast<float>(std::sqrt(gx * gx + gy * gy));
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) theta += 2.0 * 3.14159265358979323846;
            ori[i] = static_cast<float>(theta);
        }
    });

    LocalDescriptorField field;
    field.params = params;
    field.image_width = w;
    field.image_height = h;
    const int grid_w = (w - params.patch) / params.stride + 1;
    const int grid_h = (h - params.patch) / params.stride + 1;
    field.xs.resize(static_cast<std::size_t>(grid_w) * grid_h);
    field.ys.resize(field.xs.size());
    field.descriptors = MatrixF(field.xs.size(), params.dim(), 0.0f);

    const int cell = params.patch / params.cells;
    const double two_pi = 2.0 * 3.14159265358979323846;

    parallel_for(0, grid_h, [&](int gy) {
        std::vector<double> hist(params.dim());
        for (int gx = 0; gx < grid_w; ++gx) {
            const int idx = gy * grid_w + gx;
            const int x0 = gx * params.stride;
            const int y0 = gy * params.stride;
            field.xs[idx] = x0;
            field.ys[idx] = y0;
            std::fill(hist.begin(), hist.end(), 0.0);

            for (int py = 0; py < params.patch; ++py)
                for (int px = 0; px < params.patch; ++px) {
                    const std::size_t pi = static_cast<std::size_t>(y0 + py) * w + (x0 + px);
                    const double m = mag[pi];
                    if (m == 0.0) continue;

                    double ob = ori[pi] / two_pi * params.bins;
                    if (ob >= params.bins) ob -= params.bins;
                    const int o0 = static_cast<int>(ob);
                    const double fo = ob - o0;

                    const double cx = (px + 0.5) / cell - 0.5;
                    const double cy = (py + 0.5) / cell - 0.5;
                    const int cx0 = static_cast<int>(std::floor(cx));
                    const int cy0 = static_cast<int>(std::floor(cy));
                    const double fx = cx - cx0;
                    const double fy = cy - cy0;

                    for (int dy = 0; dy <= 1; ++dy) {
                        const int cyi = cy0 + dy;
                        if (cyi < 0 || cyi >= params.cells) continue;
                        const double wy = dy ? fy : 1.0 - fy;
                        for (int dx = 0; dx <= 1; ++dx) {
                            const int cxi = cx0 + dx;
                            if (cxi < 0 || cxi >= params.cells) continue;
                            const double wx = dx ? fx : 1.0 - fx;
                            for (int db = 0; db <= 1; ++db) {
                                const int b = (o0 + db) % params.bins;
                                const double wb = db ? fo : 1.0 - fo;
                                hist[(cyi * params.cells + cxi) * params.bins + b] +=
                                    m * wy * wx * wb;
                            }
                        }
                    }
                }

            double norm = 0.0;
            for (double v : hist) norm += v * v;
            norm = std::sqrt(norm);
            float* out = field.descriptors.row(idx);
            if (norm < 1e-12) continue;  // zero-gradient patch stays zero
            for (int i = 0; i < params.dim(); ++i) hist[i] /= norm;
            norm = 1.0;
            if (params.clamp > 0.0) {
                for (int i = 0; i < params.dim(); ++i) hist[i] = std::min(hist[i], params.clamp);
                norm = 0.0;
                for (double v : hist) norm += v * v;
                norm = std::sqrt(norm);
            }
            for (int i = 0; i < params.dim(); ++i)
                out[i] = static_cast<float>(hist[i] / norm);
        }
    });

    return field;
}

}  // namespace sobd
