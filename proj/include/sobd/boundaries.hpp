#pragma once

#include <cstdint>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/image.hpp"

namespace sobd {

// Which segment transitions count as object boundaries.
struct BoundaryMode {
    bool single_class = false;
    int class_id = 0;

    static BoundaryMode all_classes() { return {}; }
    static BoundaryMode only_class(int c) { return {true, c}; }
};

// Binary ground-truth boundary map from a labeled segmentation.
//
// A 4-neighbor transition between different segment ids qualifies when at
// least one side is a labeled segment (all_classes) or one side belongs to
// the requested class (single_class). Both pixels of a qualifying
// transition are marked; thinning later collapses the two-pixel band.
// Unlabeled/unlabeled transitions never produce boundaries.
inline BoundaryMap extract_gt_boundaries(const LabeledSegmentation& seg,
                                         BoundaryMode mode = BoundaryMode::all_classes()) {
    seg.validate();
    BoundaryMap map(seg.width, seg.height, 0.0f);
    auto qualifies = [&](std::uint16_t a, std::uint16_t b) {
        if (a == b) return false;
        if (mode.single_class)
            return seg.class_of(a) == mode.class_id || seg.class_of(b) == mode.class_id;
        return a != 0 || b != 0;
    };
    for (int y = 0; y < seg.height; ++y) {
        for (int x = 0; x < seg.width; ++x) {
            const std::uint16_t here = seg.segment_at(x, y);
            if (x + 1 < seg.width && qualifies(here, seg.segment_at(x + 1, y))) {
                map.set(x, y, 1.0f);
                map.set(x + 1, y, 1.0f);
            }
            if (y + 1 < seg.height && qualifies(here, seg.segment_at(x, y + 1))) {
                map.set(x, y, 1.0f);
                map.set(x, y + 1, 1.0f);
            }
        }
    }
    return map;
}

inline BoundaryMap threshold_map(const BoundaryMap& map, double threshold) {
    BoundaryMap out(map.width, map.height, 0.0f);
    for (std::size_t i = 0; i < map.size(); ++i)
        out.values[i] = map.values[i] >= threshold ? 1.0f : 0.0f;
    return out;
}

namespace detail {

// Zhang-Suen thinning pass; returns number of deleted pixels.
inline int zhang_suen_pass(std::vector<std::uint8_t>& pix, int w, int h, int phase) {
    auto at = [&](int x, int y) -> std::uint8_t {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0;
        return pix[static_cast<std::size_t>(y) * w + x];
    };
    std::vector<std::size_t> to_delete;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!at(x, y)) continue;
            // Neighbors clockwise from north.
            const std::uint8_t p2 = at(x, y - 1), p3 = at(x + 1, y - 1), p4 = at(x + 1, y);
            const std::uint8_t p5 = at(x + 1, y + 1), p6 = at(x, y + 1), p7 = at(x - 1, y + 1);
            const std::uint8_t p8 = at(x - 1, y), p9 = at(x - 1, y - 1);
            const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
            if (b < 2 || b > 6) continue;
            const std::uint8_t seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
            int transitions = 0;
            for (int i = 0; i < 8; ++i)
                if (!seq[i] && seq[i + 1]) ++transitions;
            if (transitions != 1) continue;
            if (phase == 0) {
                if (p2 && p4 && p6) continue;
                if (p4 && p6 && p8) continue;
            } else {
                if (p2 && p4 && p8) continue;
                if (p2 && p6 && p8) continue;
            }
            to_delete.push_back(static_cast<std::size_t>(y) * w + x);
        }
    }
    for (std::size_t i : to_delete) pix[i] = 0;
    return static_cast<int>(to_delete.size());
}

}  // namespace detail

// Threshold then morphologically thin to one-pixel-wide curves
// (Zhang-Suen, iterated to a fixed point, hence idempotent on binary maps).
inline BoundaryMap boundary_thin(const BoundaryMap& map, double threshold) {
    require(threshold >= 0.0 && threshold <= 1.0, "boundary_thin: threshold must be in [0,1]");
    const int w = map.width, h = map.height;
    std::vector<std::uint8_t> pix(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) pix[i] = map.values[i] >= threshold ? 1 : 0;

    for (;;) {
        const int d0 = detail::zhang_suen_pass(pix, w, h, 0);
        const int d1 = detail::zhang_suen_pass(pix, w, h, 1);
        if (d0 + d1 == 0) break;
    }

    BoundaryMap out(w, h, 0.0f);
    for (std::size_t i = 0; i < map.size(); ++i) out.values[i] = pix[i] ? 1.0f : 0.0f;
    return out;
}

inline std::size_t count_positive(const BoundaryMap& map) {
    std::size_t n = 0;
    for (float v : map.values)
        if (v > 0.0f) ++n;
    return n;
}

}  // namespace sobd
