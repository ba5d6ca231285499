#pragma once

// Forest of structured trees plus dense sliding-window prediction with
// coverage-normalized vote averaging.

#include <cstdint>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/channels.hpp"
#include "sobd/edge_tree.hpp"
#include "sobd/image.hpp"
#include "sobd/parallel.hpp"
#include "sobd/patches.hpp"
#include "sobd/random.hpp"

namespace sobd {

struct ForestConfig {
    int trees = 8;
    int patch_budget = 25000;  // per tree
    int stride = 2;            // kept even to preserve half-res alignment
    TreeConfig tree;
};

struct ForestTrainReport {
    std::vector<TreeTrainStats> trees;
};

struct EdgeForest {
    std::uint32_t feature_layout = kFeatureLayoutVersion;
    int stride = 2;
    std::vector<EdgeTree> trees;

    int tree_count() const { return static_cast<int>(trees.size()); }
};

// Per-image training input; the segmentation supplies both sampling targets
// and leaf structures.
struct ForestTrainImage {
    const Image* image = nullptr;
    const LabeledSegmentation* seg = nullptr;
};

// Trains `config.trees` trees, each on its own seeded patch draw from the
// situation's images. Tree t depends only on (forest_seed, t) and the input
// set, so the monolithic detector is literally a one-situation forest.
inline EdgeForest train_forest(const std::vector<ForestTrainImage>& images,
                               const ForestConfig& config, std::uint64_t forest_seed,
                               const WarnSink& sink = {},
                               ForestTrainReport* report = nullptr) {
    require(!images.empty(), "train_forest: no training images");
    require(config.trees >= 1, "train_forest: need at least one tree");
    require(config.stride >= 1 && config.stride % 2 == 0,
            "train_forest: stride must be a positive even number, got ", config.stride);
    for (std::size_t i = 0; i < images.size(); ++i) {
        require(images[i].image != nullptr && images[i].seg != nullptr,
                "train_forest: null image entry ", i);
        require(images[i].image->width == images[i].seg->width &&
                    images[i].image->height == images[i].seg->height,
                "train_forest: image/segmentation size mismatch at entry ", i);
    }

    std::vector<ChannelStack> stacks(images.size());
    parallel_for(0, static_cast<std::int64_t>(images.size()), [&](std::int64_t i) {
        stacks[i] = compute_channels(*images[i].image);
    });
    std::vector<const ChannelStack*> stack_ptrs(stacks.size());
    for (std::size_t i = 0; i < stacks.size(); ++i) stack_ptrs[i] = &stacks[i];

    std::vector<const LabeledSegmentation*> segs(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) segs[i] = images[i].seg;

    EdgeForest forest;
    forest.stride = config.stride;
    forest.trees.resize(config.trees);
    std::vector<TreeTrainStats> stats(config.trees);
    std::vector<std::string> deferred_warnings(config.trees);
    parallel_for(0, config.trees, [&](std::int64_t t) {
        std::string local;
        WarnSink tree_sink = [&local](const std::string& msg) {
            local += local.empty() ? msg : "\n" + msg;
        };
        const std::vector<PatchSample> samples = sample_patches(
            segs, config.patch_budget,
            derive_seed(forest_seed, 0x70617463ULL, static_cast<std::uint64_t>(t)),
            tree_sink);
        forest.trees[t] = train_tree(samples, stack_ptrs, config.tree,
                                     derive_seed(forest_seed, static_cast<std::uint64_t>(t)),
                                     &stats[t]);
        deferred_warnings[t] = std::move(local);
    });
    for (int t = 0; t < config.trees; ++t)
        if (!deferred_warnings[t].empty())
            warn(sink, str_cat("tree ", t, ": ", deferred_warnings[t]));
    if (report) report->trees = std::move(stats);
    return forest;
}

namespace detail {

// Number of windows along one axis whose central 16x16 band covers
// coordinate v, for window origins 0, stride, ..., <= max_origin.
inline std::vector<std::int32_t> coverage_counts(int full, int stride) {
    const int margin = (kPatchSize - kMaskSize) / 2;  // 8
    const int max_origin = max_window_origin(full);
    std::vector<std::int32_t> cov(full, 0);
    for (int v = 0; v < full; ++v) {
        int lo = v - margin - (kMaskSize - 1);  // earliest covering origin
        int hi = v - margin;                    // latest covering origin
        if (lo < 0) lo = 0;
        if (hi > max_origin) hi = max_origin;
        if (lo > hi) continue;
        // Origins are multiples of stride in [lo, hi].
        const int first = (lo + stride - 1) / stride;
        const int last = hi / stride;
        if (last >= first) cov[v] = last - first + 1;
    }
    return cov;
}

}  // namespace detail

// Dense prediction on precomputed channels: every tree votes its leaf mask
// onto each window's central 16x16 area, and each pixel's output is its
// vote total divided by (covering windows x trees), giving values in [0,1].
// Pixels no window covers stay 0. Runs as two passes (leaf lookup, then
// per-output-row vote gathering) so results are identical for any thread
// count.
inline BoundaryMap predict_on_channels(const EdgeForest& forest, const ChannelStack& stack) {
    require(!forest.trees.empty(), "predict: empty forest");
    require(forest.feature_layout == kFeatureLayoutVersion,
            "predict: model feature layout ", forest.feature_layout,
            " does not match this build (", kFeatureLayoutVersion, ")");
    const int w = stack.full_width, h = stack.full_height;
    const int stride = forest.stride;
    const int margin = (kPatchSize - kMaskSize) / 2;
    const int nx = max_window_origin(w) / stride + 1;
    const int ny = max_window_origin(h) / stride + 1;
    const int trees = forest.tree_count();

    std::vector<std::int32_t> leaves(static_cast<std::size_t>(nx) * ny * trees);
    parallel_for(0, ny, [&](std::int64_t wy) {
        const int y0 = static_cast<int>(wy) * stride;
        std::int32_t* row = &leaves[static_cast<std::size_t>(wy) * nx * trees];
        for (int wx = 0; wx < nx; ++wx)
            for (int t = 0; t < trees; ++t)
                row[wx * trees + t] = forest.trees[t].predict_leaf(stack, wx * stride, y0);
    });

    const std::vector<std::int32_t> cov_x = detail::coverage_counts(w, stride);
    const std::vector<std::int32_t> cov_y = detail::coverage_counts(h, stride);

    BoundaryMap out(w, h, 0.0f);
    parallel_for(0, h, [&](std::int64_t y) {
        if (cov_y[y] == 0) return;
        std::vector<float> votes(w, 0.0f);
        const int wy_lo =
            std::max(0, (static_cast<int>(y) - margin - (kMaskSize - 1) + stride - 1) / stride);
        const int wy_hi = std::min(ny - 1, (static_cast<int>(y) - margin) / stride);
        for (int wy = wy_lo; wy <= wy_hi; ++wy) {
            const int mask_row = static_cast<int>(y) - wy * stride - margin;
            const std::int32_t* row = &leaves[static_cast<std::size_t>(wy) * nx * trees];
            for (int wx = 0; wx < nx; ++wx) {
                const int base_x = wx * stride + margin;
                for (int t = 0; t < trees; ++t) {
                    std::uint32_t bits =
                        forest.trees[t].mask[row[wx * trees + t]].row16(mask_row);
                    while (bits) {
                        votes[base_x + std::countr_zero(bits)] += 1.0f;
                        bits &= bits - 1;
                    }
                }
            }
        }
        float* out_row = &out.values[static_cast<std::size_t>(y) * w];
        for (int x = 0; x < w; ++x)
            if (cov_x[x] > 0)
                out_row[x] = votes[x] / (static_cast<float>(cov_x[x]) * cov_y[y] * trees);
    });
    return out;
}

inline BoundaryMap predict(const EdgeForest& forest, const Image& image) {
    return predict_on_channels(forest, compute_channels(image));
}

}  // namespace sobd
