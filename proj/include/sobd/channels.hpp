#pragma once

// Feature channels for the patch-based boundary detector: 3 color channels
// (scaled CIE LUV), gradient magnitude at 2 scales, and 4 hard-binned
// oriented-gradient channels at 2 scales (13 planes total). Planes are
// stored at half resolution; patch features are raw plane values over the
// 16x16 half-res window plus pairwise differences of 5x5 cell means.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/image.hpp"
#include "sobd/parallel.hpp"

namespace sobd {

inline constexpr int kPatchSize = 32;       // input window side, full res
inline constexpr int kMaskSize = 16;        // structured target side
inline constexpr int kChannelCount = 13;
inline constexpr int kSelfSimGrid = 5;      // 5x5 cells over the half-res window
inline constexpr int kSelfSimCells = kSelfSimGrid * kSelfSimGrid;
inline constexpr int kSelfSimPairs = kSelfSimCells * (kSelfSimCells - 1) / 2;  // 300
inline constexpr int kRawFeaturesPerChannel = kMaskSize * kMaskSize;           // 256
inline constexpr int kPatchFeatureCount =
    kChannelCount * (kRawFeaturesPerChannel + kSelfSimPairs);  // 7228

// Identifies the channel/feature layout in serialized models; bump on any
// change to the definitions in this header.
inline constexpr std::uint32_t kFeatureLayoutVersion = 1;

// Cell boundaries of the 5x5 self-similarity grid within the 16-pixel
// half-res window (cell widths 3,3,4,3,3).
inline constexpr std::array<int, kSelfSimGrid + 1> kCellOffsets = {0, 3, 6, 10, 13, 16};

namespace detail {

struct CellPair {
    std::uint8_t a = 0;
    std::uint8_t b = 0;
};

// Cell pairs (a < b) in lexicographic order; cell index = row * 5 + col.
inline const std::array<CellPair, kSelfSimPairs>& self_sim_pairs() {
    static const std::array<CellPair, kSelfSimPairs> pairs = [] {
        std::array<CellPair, kSelfSimPairs> p{};
        int idx = 0;
        for (int a = 0; a < kSelfSimCells; ++a)
            for (int b = a + 1; b < kSelfSimCells; ++b)
                p[idx++] = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)};
        return p;
    }();
    return pairs;
}

// sRGB (0..1) to scaled CIE LUV, D65 white point. The scaling maps the
// usual L in [0,100], u in [-134,220], v in [-140,122] ranges to roughly
// [0,1] so all color channels share the gradient channels' magnitude.
inline void rgb_to_luv(double r, double g, double b, float& l_out, float& u_out, float& v_out) {
    auto linearize = [](double c) {
        return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    };
    const double rl = linearize(r), gl = linearize(g), bl = linearize(b);
    const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;

    const double l = y > 0.008856451679035631 ? 116.0 * std::cbrt(y) - 16.0 : 903.2962962962963 * y;
    const double denom = x + 15.0 * y + 3.0 * z;
    const double up = denom > 0.0 ? 4.0 * x / denom : 0.0;
    const double vp = denom > 0.0 ? 9.0 * y / denom : 0.0;
    const double u = 13.0 * l * (up - 0.19783982482140777);
    const double v = 13.0 * l * (vp - 0.4683363029324097);

    l_out = static_cast<float>(l / 100.0);
    u_out = static_cast<float>((u + 134.0) / 354.0);
    v_out = static_cast<float>((v + 140.0) / 262.0);
}

// Separable [1 2 1]/4 triangle smoothing with replicated borders.
inline void triangle_smooth(std::vector<float>& plane, int w, int h) {
    std::vector<float> tmp(plane.size());
    for (int y = 0; y < h; ++y) {
        const float* row = &plane[static_cast<std::size_t>(y) * w];
        float* out = &tmp[static_cast<std::size_t>(y) * w];
        for (int x = 0; x < w; ++x) {
            const float a = row[x > 0 ? x - 1 : 0];
            const float c = row[x + 1 < w ? x + 1 : w - 1];
            out[x] = 0.25f * (a + 2.0f * row[x] + c);
        }
    }
    for (int y = 0; y < h; ++y) {
        const float* up = &tmp[static_cast<std::size_t>(y > 0 ? y - 1 : 0) * w];
        const float* mid = &tmp[static_cast<std::size_t>(y) * w];
        const float* down = &tmp[static_cast<std::size_t>(y + 1 < h ? y + 1 : h - 1) * w];
        float* out = &plane[static_cast<std::size_t>(y) * w];
        for (int x = 0; x < w; ++x) out[x] = 0.25f * (up[x] + 2.0f * mid[x] + down[x]);
    }
}

// 2x2 box average; trailing odd row/column is dropped.
inline std::vector<float> downsample2(const std::vector<float>& plane, int w, int hw, int hh) {
    std::vector<float> out(static_cast<std::size_t>(hw) * hh);
    for (int y = 0; y < hh; ++y)
        for (int x = 0; x < hw; ++x) {
            const float* r0 = &plane[static_cast<std::size_t>(2 * y) * w + 2 * x];
            const float* r1 = r0 + w;
            out[static_cast<std::size_t>(y) * hw + x] =
                0.25f * (r0[0] + r0[1] + r1[0] + r1[1]);
        }
    return out;
}

// Per-pixel gradient over 3 color planes: clamped central differences, and
// the channel with the largest magnitude supplies both the magnitude and
// the orientation (mapped to [0, pi)).
inline void color_gradient(const std::array<std::vector<float>, 3>& luv, int w, int h,
                           std::vector<float>& mag, std::vector<float>& orient) {
    mag.assign(static_cast<std::size_t>(w) * h, 0.0f);
    orient.assign(static_cast<std::size_t>(w) * h, 0.0f);
    parallel_for(0, h, [&](std::int64_t y) {
        for (int x = 0; x < w; ++x) {
            const int xm = x > 0 ? x - 1 : 0, xp = x + 1 < w ? x + 1 : w - 1;
            const int ym = y > 0 ? static_cast<int>(y) - 1 : 0;
            const int yp = y + 1 < h ? static_cast<int>(y) + 1 : h - 1;
            float best_m2 = -1.0f, best_dx = 0.0f, best_dy = 0.0f;
            for (int c = 0; c < 3; ++c) {
                const std::vector<float>& p = luv[c];
                const float dx = 0.5f * (p[y * w + xp] - p[y * w + xm]);
                const float dy = 0.5f * (p[static_cast<std::size_t>(yp) * w + x] -
                                         p[static_cast<std::size_t>(ym) * w + x]);
                const float m2 = dx * dx + dy * dy;
                if (m2 > best_m2) {
                    best_m2 = m2;
                    best_dx = dx;
                    best_dy = dy;
                }
            }
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            mag[i] = std::sqrt(best_m2);
            if (mag[i] > 0.0f) {
                float theta = std::atan2(best_dy, best_dx);
                if (theta < 0.0f) theta += std::numbers::pi_v<float>;
                if (theta >= std::numbers::pi_v<float>) theta = 0.0f;
                orient[i] = theta;
            }
        }
    });
}

inline int orientation_bin(float theta) {
    const int bin = static_cast<int>(theta / (std::numbers::pi_v<float> / 4.0f));
    return bin < 0 ? 0 : (bin > 3 ? 3 : bin);
}

}  // namespace detail

// All 13 feature planes of one image at half resolution, plus per-plane
// summed-area tables for O(1) cell means. Plane order:
//   0..2   L, U, V
//   3      gradient magnitude, fine scale
//   4      gradient magnitude, coarse scale
//   5..8   oriented gradient bins 0..3 (bin 0 = horizontal gradient), fine
//   9..12  oriented gradient bins 0..3, coarse
struct ChannelStack {
    int full_width = 0;
    int full_height = 0;
    int width = 0;   // = full_width / 2
    int height = 0;  // = full_height / 2
    std::array<std::vector<float>, kChannelCount> planes;
    std::array<std::vector<double>, kChannelCount> sat;  // (width+1) x (height+1)

    float plane_at(int c, int x, int y) const {
        return planes[c][static_cast<std::size_t>(y) * width + x];
    }

    // Sum of plane c over [x0, x1) x [y0, y1).
    double box_sum(int c, int x0, int y0, int x1, int y1) const {
        const std::vector<double>& s = sat[c];
        const int sw = width + 1;
        return s[static_cast<std::size_t>(y1) * sw + x1] -
               s[static_cast<std::size_t>(y0) * sw + x1] -
               s[static_cast<std::size_t>(y1) * sw + x0] +
               s[static_cast<std::size_t>(y0) * sw + x0];
    }
};

inline ChannelStack compute_channels(const Image& img) {
    require(img.valid(), "compute_channels: invalid image");
    require(img.width >= kMinForestImageSide && img.height >= kMinForestImageSide,
            "compute_channels: image smaller than ", kMinForestImageSide, "x",
            kMinForestImageSide, " (", img.width, "x", img.height, ")");
    const int w = img.width, h = img.height;
    const int hw = w / 2, hh = h / 2;

    // Full-res LUV, smoothed once before any gradient.
    std::array<std::vector<float>, 3> luv;
    for (auto& p : luv) p.resize(static_cast<std::size_t>(w) * h);
    parallel_for(0, h, [&](std::int64_t y) {
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* px = img.pixel(x, static_cast<int>(y));
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            detail::rgb_to_luv(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0, luv[0][i],
                               luv[1][i], luv[2][i]);
        }
    });
    for (auto& p : luv) detail::triangle_smooth(p, w, h);

    ChannelStack out;
    out.full_width = w;
    out.full_height = h;
    out.width = hw;
    out.height = hh;

    // Color channels: half-res LUV.
    std::array<std::vector<float>, 3> luv_half;
    for (int c = 0; c < 3; ++c) {
        luv_half[c] = detail::downsample2(luv[c], w, hw, hh);
        out.planes[c] = luv_half[c];
    }

    // Fine scale: gradients at full resolution, then box-downsampled.
    {
        std::vector<float> mag, orient;
        detail::color_gradient(luv, w, h, mag, orient);
        out.planes[3] = detail::downsample2(mag, w, hw, hh);
        std::vector<float> bin_plane(static_cast<std::size_t>(w) * h);
        for (int b = 0; b < 4; ++b) {
            for (std::size_t i = 0; i < mag.size(); ++i)
                bin_plane[i] =
                    (mag[i] > 0.0f && detail::orientation_bin(orient[i]) == b) ? mag[i] : 0.0f;
            out.planes[5 + b] = detail::downsample2(bin_plane, w, hw, hh);
        }
    }

    // Coarse scale: gradients of the half-res color planes.
    {
        std::vector<float> mag, orient;
        detail::color_gradient(luv_half, hw, hh, mag, orient);
        out.planes[4] = mag;
        for (int b = 0; b < 4; ++b) {
            std::vector<float> bin_plane(mag.size());
            for (std::size_t i = 0; i < mag.size(); ++i)
                bin_plane[i] =
                    (mag[i] > 0.0f && detail::orientation_bin(orient[i]) == b) ? mag[i] : 0.0f;
            out.planes[9 + b] = std::move(bin_plane);
        }
    }

    for (int c = 0; c < kChannelCount; ++c) detail::triangle_smooth(out.planes[c], hw, hh);

    // Summed-area tables for cell means.
    parallel_for(0, kChannelCount, [&](std::int64_t c) {
        std::vector<double>& s = out.sat[c];
        const std::vector<float>& p = out.planes[c];
        const int sw = hw + 1;
        s.assign(static_cast<std::size_t>(sw) * (hh + 1), 0.0);
        for (int y = 0; y < hh; ++y) {
            double row_sum = 0.0;
            for (int x = 0; x < hw; ++x) {
                row_sum += p[static_cast<std::size_t>(y) * hw + x];
                s[static_cast<std::size_t>(y + 1) * sw + x + 1] =
                    s[static_cast<std::size_t>(y) * sw + x + 1] + row_sum;
            }
        }
    });
    return out;
}

// Feature f of the 32x32 window whose top-left full-res corner is (x0, y0);
// both coordinates must be even so the window aligns with the half-res
// planes. Layout: first kChannelCount * 256 raw half-res window values
// (channel-major, row-major within the 16x16 window), then kChannelCount *
// 300 self-similarity cell-mean differences (channel-major, pair order from
// detail::self_sim_pairs).
inline float patch_feature(const ChannelStack& s, int x0, int y0, int f) {
    const int hx = x0 / 2, hy = y0 / 2;
    if (f < kChannelCount * kRawFeaturesPerChannel) {
        const int c = f / kRawFeaturesPerChannel;
        const int r = f % kRawFeaturesPerChannel;
        return s.plane_at(c, hx + r % kMaskSize, hy + r / kMaskSize);
    }
    const int g = f - kChannelCount * kRawFeaturesPerChannel;
    const int c = g / kSelfSimPairs;
    const detail::CellPair pair = detail::self_sim_pairs()[g % kSelfSimPairs];
    auto cell_mean = [&](int cell) {
        const int cx = cell % kSelfSimGrid, cy = cell / kSelfSimGrid;
        const int ax0 = hx + kCellOffsets[cx], ax1 = hx + kCellOffsets[cx + 1];
        const int ay0 = hy + kCellOffsets[cy], ay1 = hy + kCellOffsets[cy + 1];
        return s.box_sum(c, ax0, ay0, ax1, ay1) /
               static_cast<double>((ax1 - ax0) * (ay1 - ay0));
    };
    return static_cast<float>(cell_mean(pair.a) - cell_mean(pair.b));
}

// Largest valid even window origin along an axis of length `full`.
inline int max_window_origin(int full) {
    const int m = full - kPatchSize;
    return m - (m % 2);
}

}  // namespace sobd
