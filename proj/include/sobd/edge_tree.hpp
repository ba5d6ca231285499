#pragma once

// Structured decision tree over 32x32 patches: split labels come from
// same-segment pixel-pair tests on the 16x16 target, reduced to one bit per
// sample by the sign of a 1-D PCA projection; leaves store the boundary
// mask of the medoid target structure.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/channels.hpp"
#include "sobd/patches.hpp"
#include "sobd/random.hpp"

namespace sobd {

inline constexpr int kPairTests = 256;

// Packed 256-bit vector; bit t is the outcome of pair test t (or, for leaf
// masks, pixel t of the 16x16 window in row-major order).
struct Bits256 {
    std::array<std::uint64_t, 4> w{};

    bool test(int i) const { return (w[i >> 6] >> (i & 63)) & 1u; }
    void set(int i) { w[i >> 6] |= std::uint64_t{1} << (i & 63); }
    int popcount() const {
        return std::popcount(w[0]) + std::popcount(w[1]) + std::popcount(w[2]) +
               std::popcount(w[3]);
    }
    bool operator==(const Bits256& o) const { return w == o.w; }

    // 16 bits of mask row r (row-major 16x16 layout).
    std::uint32_t row16(int r) const {
        return static_cast<std::uint32_t>(w[r >> 2] >> ((r & 3) * 16)) & 0xffffu;
    }
};

// Lexicographic order on the bit sequence b0, b1, ..., b255.
inline bool bits_lex_less(const Bits256& a, const Bits256& b) {
    for (int k = 0; k < 4; ++k) {
        const std::uint64_t diff = a.w[k] ^ b.w[k];
        if (diff) return ((a.w[k] >> std::countr_zero(diff)) & 1u) == 0;
    }
    return false;
}

namespace detail {

struct PixelPair {
    std::uint8_t a = 0;
    std::uint8_t b = 0;
};

// 256 distinct-pixel pairs drawn from the node's seed.
inline std::array<PixelPair, kPairTests> draw_pixel_pairs(std::uint64_t node_seed) {
    Rng rng(derive_seed(node_seed, 0x70616972ULL));
    std::array<PixelPair, kPairTests> pairs{};
    for (auto& p : pairs) {
        p.a = static_cast<std::uint8_t>(rng.uniform_int(kMaskSize * kMaskSize));
        std::uint8_t b = static_cast<std::uint8_t>(rng.uniform_int(kMaskSize * kMaskSize - 1));
        if (b >= p.a) ++b;
        p.b = b;
    }
    return pairs;
}

inline Bits256 pair_test_vector(const std::uint16_t* target,
                                const std::array<PixelPair, kPairTests>& pairs) {
    Bits256 v;
    for (int t = 0; t < kPairTests; ++t)
        if (target[pairs[t].a] == target[pairs[t].b]) v.set(t);
    return v;
}

// Binary Shannon entropy of an (n0, n1) count split, natural log.
inline double binary_entropy(std::int64_t n0, std::int64_t n1) {
    const double n = static_cast<double>(n0 + n1);
    double h = 0.0;
    if (n0 > 0) h -= (n0 / n) * std::log(n0 / n);
    if (n1 > 0) h -= (n1 / n) * std::log(n1 / n);
    return h;
}

}  // namespace detail

struct SplitLabels {
    std::vector<std::uint8_t> label;  // one bit per sample
    bool pure = false;                // all pair-test vectors identical
};

namespace detail {

// PCA-sign labels over precomputed pair-test vectors. The principal
// direction is found by seeded power iteration over an evenly strided
// subsample of at most 1024 vectors; the projection itself runs over every
// sample, and zero projections map to +.
inline SplitLabels split_labels_from_vectors(const std::vector<Bits256>& vecs,
                                             std::uint64_t node_seed) {
    const std::size_t n = vecs.size();
    SplitLabels out;
    out.pure = true;
    for (std::size_t i = 1; i < n && out.pure; ++i) out.pure = vecs[i] == vecs[0];
    if (out.pure) {
        out.label.assign(n, 1);
        return out;
    }

    std::array<double, kPairTests> mean{};
    for (const Bits256& v : vecs)
        for (int t = 0; t < kPairTests; ++t) mean[t] += v.test(t);
    for (double& m : mean) m /= static_cast<double>(n);

    const std::size_t m = std::min<std::size_t>(n, 1024);
    std::array<double, kPairTests> u{};
    {
        Rng rng(derive_seed(node_seed, 0x706f7765ULL));
        double norm2 = 0.0;
        for (double& c : u) {
            c = rng.normal();
            norm2 += c * c;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& c : u) c *= inv;
    }
    for (int iter = 0; iter < 24; ++iter) {
        std::array<double, kPairTests> w{};
        double mean_dot_u = 0.0;
        for (int t = 0; t < kPairTests; ++t) mean_dot_u += mean[t] * u[t];
        double sum_proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const Bits256& v = vecs[i * n / m];
            double dot = -mean_dot_u;
            for (int k = 0; k < 4; ++k) {
                std::uint64_t bits = v.w[k];
                while (bits) {
                    dot += u[k * 64 + std::countr_zero(bits)];
                    bits &= bits - 1;
                }
            }
            sum_proj += dot;
            for (int k = 0; k < 4; ++k) {
                std::uint64_t bits = v.w[k];
                while (bits) {
                    w[k * 64 + std::countr_zero(bits)] += dot;
                    bits &= bits - 1;
                }
            }
        }
        double norm2 = 0.0;
        for (int t = 0; t < kPairTests; ++t) {
            w[t] -= sum_proj * mean[t];
            norm2 += w[t] * w[t];
        }
        if (norm2 < 1e-60) break;  // subsample degenerate along u; keep current direction
        const double inv = 1.0 / std::sqrt(norm2);
        for (int t = 0; t < kPairTests; ++t) u[t] = w[t] * inv;
    }

    double mean_dot_u = 0.0;
    for (int t = 0; t < kPairTests; ++t) mean_dot_u += mean[t] * u[t];
    out.label.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = -mean_dot_u;
        for (int k = 0; k < 4; ++k) {
            std::uint64_t bits = vecs[i].w[k];
            while (bits) {
                dot += u[k * 64 + std::countr_zero(bits)];
                bits &= bits - 1;
            }
        }
        out.label[i] = dot >= 0.0 ? 1 : 0;
    }
    return out;
}

}  // namespace detail

// Labels each sample by the sign of its centered pair-test vector projected
// on the top principal direction; the pair set and the PCA start vector
// both derive from node_seed.
inline SplitLabels structured_split_label(const std::vector<const std::uint16_t*>& targets,
                                          std::uint64_t node_seed) {
    require(targets.size() >= 2, "structured_split_label: need at least 2 samples, got ",
            targets.size());
    const auto pairs = detail::draw_pixel_pairs(node_seed);
    std::vector<Bits256> vecs(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
        vecs[i] = detail::pair_test_vector(targets[i], pairs);
    return detail::split_labels_from_vectors(vecs, node_seed);
}

// Boundary mask of a 16x16 segment-id patch: a pixel is boundary when any
// 4-neighbor inside the window has a different segment id, so both sides of
// a transition are marked (same convention as the ground-truth extraction).
inline Bits256 mask_from_target(const std::uint16_t* target) {
    Bits256 mask;
    for (int y = 0; y < kMaskSize; ++y)
        for (int x = 0; x < kMaskSize; ++x) {
            const std::uint16_t here = target[y * kMaskSize + x];
            const bool edge =
                (x > 0 && target[y * kMaskSize + x - 1] != here) ||
                (x + 1 < kMaskSize && target[y * kMaskSize + x + 1] != here) ||
                (y > 0 && target[(y - 1) * kMaskSize + x] != here) ||
                (y + 1 < kMaskSize && target[(y + 1) * kMaskSize + x] != here);
            if (edge) mask.set(y * kMaskSize + x);
        }
    return mask;
}

struct TreeConfig {
    int min_leaf = 8;
    int max_depth = 64;
    int feature_candidates = 0;  // 0 -> round(sqrt(feature count))

    int resolved_candidates() const {
        return feature_candidates > 0
                   ? feature_candidates
                   : static_cast<int>(std::lround(std::sqrt(
                         static_cast<double>(kPatchFeatureCount))));
    }
};

struct TreeTrainStats {
    std::vector<double> split_gains;
    int leaf_count = 0;
    int depth = 0;
};

// Flat node arrays in depth-first preorder; feature < 0 marks a leaf.
struct EdgeTree {
    std::vector<std::int32_t> feature;
    std::vector<float> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<std::uint32_t> count;  // training samples that reached the node
    std::vector<Bits256> mask;         // boundary mask; meaningful at leaves

    int node_count() const { return static_cast<int>(feature.size()); }

    int predict_leaf(const ChannelStack& stack, int x0, int y0) const {
        int node = 0;
        while (feature[node] >= 0)
            node = patch_feature(stack, x0, y0, feature[node]) < threshold[node]
                       ? left[node]
                       : right[node];
        return node;
    }
};

namespace detail {

struct TreeBuilder {
    const std::vector<PatchSample>& samples;
    const std::vector<const ChannelStack*>& stacks;
    const TreeConfig& config;
    EdgeTree tree;
    TreeTrainStats stats;

    float feature_value(int sample, int f) const {
        const PatchSample& s = samples[sample];
        return patch_feature(*stacks[s.image_slot], s.x0, s.y0, f);
    }

    int emit_node() {
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0f);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.count.push_back(0);
        tree.mask.push_back({});
        return tree.node_count() - 1;
    }

    // Medoid in pair-test space: minimal squared distance to the node mean,
    // ties by lexicographically smaller vector, then by node order (which is
    // canonical, so the choice never depends on input order).
    void fill_leaf(int node, const std::vector<int>& idx, const std::vector<Bits256>& vecs) {
        std::array<double, kPairTests> term;  // (1 - 2*mean_b) per bit
        double base = 0.0;                    // sum of mean_b^2
        {
            std::array<std::uint32_t, kPairTests> counts{};
            for (const Bits256& v : vecs)
                for (int k = 0; k < 4; ++k) {
                    std::uint64_t bits = v.w[k];
                    while (bits) {
                        ++counts[k * 64 + std::countr_zero(bits)];
                        bits &= bits - 1;
                    }
                }
            for (int t = 0; t < kPairTests; ++t) {
                const double mu = counts[t] / static_cast<double>(idx.size());
                term[t] = 1.0 - 2.0 * mu;
                base += mu * mu;
            }
        }
        std::size_t best = 0;
        double best_dist = 0.0;
        for (std::size_t i = 0; i < vecs.size(); ++i) {
            double dist = base;
            for (int k = 0; k < 4; ++k) {
                std::uint64_t bits = vecs[i].w[k];
                while (bits) {
                    dist += term[k * 64 + std::countr_zero(bits)];
                    bits &= bits - 1;
                }
            }
            if (i == 0 || dist < best_dist ||
                (dist == best_dist && bits_lex_less(vecs[i], vecs[best]))) {
                best = i;
                best_dist = dist;
            }
        }
        tree.feature[node] = -1;
        tree.count[node] = static_cast<std::uint32_t>(idx.size());
        tree.mask[node] = mask_from_target(samples[idx[best]].target.data());
        ++stats.leaf_count;
    }

    int build(const std::vector<int>& idx, std::uint64_t node_seed, int depth) {
        const int node = emit_node();
        tree.count[node] = static_cast<std::uint32_t>(idx.size());
        stats.depth = std::max(stats.depth, depth);
        const int n = static_cast<int>(idx.size());

        const auto pairs = draw_pixel_pairs(node_seed);
        std::vector<Bits256> vecs(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            vecs[i] = pair_test_vector(samples[idx[i]].target.data(), pairs);

        if (depth >= config.max_depth || n < 2 * config.min_leaf) {
            fill_leaf(node, idx, vecs);
            return node;
        }

        const SplitLabels labels = split_labels_from_vectors(vecs, node_seed);
        if (labels.pure) {
            fill_leaf(node, idx, vecs);
            return node;
        }

        std::int64_t total1 = 0;
        for (std::uint8_t l : labels.label) total1 += l;
        const double parent_entropy = binary_entropy(n - total1, total1);

        // Distinct candidate features from the node seed.
        std::vector<int> cand;
        {
            Rng rng(derive_seed(node_seed, 0x66656174ULL));
            const int want = std::min(config.resolved_candidates(), kPatchFeatureCount);
            std::vector<std::uint8_t> taken(kPatchFeatureCount, 0);
            while (static_cast<int>(cand.size()) < want) {
                const int f = static_cast<int>(rng.uniform_int(kPatchFeatureCount));
                if (!taken[f]) {
                    taken[f] = 1;
                    cand.push_back(f);
                }
            }
        }

        double best_gain = 0.0;
        int best_feature = -1;
        float best_threshold = 0.0f;
        std::vector<std::pair<float, std::uint8_t>> vals(idx.size());
        for (int f : cand) {
            for (std::size_t i = 0; i < idx.size(); ++i)
                vals[i] = {feature_value(idx[i], f), labels.label[i]};
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::int64_t left1 = 0;
            for (int p = 0; p + 1 < n; ++p) {
                left1 += vals[p].second;
                if (vals[p].first == vals[p + 1].first) continue;
                const int nl = p + 1, nr = n - nl;
                if (nl < config.min_leaf || nr < config.min_leaf) continue;
                const double gain =
                    parent_entropy -
                    (static_cast<double>(nl) / n) * binary_entropy(nl - left1, left1) -
                    (static_cast<double>(nr) / n) *
                        binary_entropy(nr - (total1 - left1), total1 - left1);
                float thr = 0.5f * (vals[p].first + vals[p + 1].first);
                if (!(thr > vals[p].first)) thr = vals[p + 1].first;
                const bool better =
                    gain > best_gain ||
                    (gain == best_gain && best_feature >= 0 &&
                     (f < best_feature || (f == best_feature && thr < best_threshold)));
                if (better) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = thr;
                }
            }
        }

        if (best_feature < 0 || best_gain <= 1e-12) {
            fill_leaf(node, idx, vecs);
            return node;
        }

        std::vector<int> li, ri;
        for (int i : idx)
            (feature_value(i, best_feature) < best_threshold ? li : ri).push_back(i);
        stats.split_gains.push_back(best_gain);
        tree.feature[node] = best_feature;
        tree.threshold[node] = best_threshold;
        vecs.clear();
        vecs.shrink_to_fit();
        const int l = build(li, derive_seed(node_seed, 0), depth + 1);
        const int r = build(ri, derive_seed(node_seed, 1), depth + 1);
        tree.left[node] = l;
        tree.right[node] = r;
        return node;
    }
};

}  // namespace detail

// Trains one structured tree. Node sample lists are kept in canonical
// (image_slot, y0, x0) order, and candidate pair sets, features, and the
// PCA start vector all derive from per-node seeds, so the result is
// invariant to the input sample order.
inline EdgeTree train_tree(const std::vector<PatchSample>& samples,
                           const std::vector<const ChannelStack*>& stacks,
                           const TreeConfig& config, std::uint64_t tree_seed,
                           TreeTrainStats* stats = nullptr) {
    require(static_cast<int>(samples.size()) >= config.min_leaf,
            "train_tree: need at least min_leaf=", config.min_leaf, " samples, got ",
            samples.size());
    require(config.min_leaf >= 1 && config.max_depth >= 1, "train_tree: bad config");
    for (const PatchSample& s : samples)
        require(s.image_slot >= 0 && static_cast<std::size_t>(s.image_slot) < stacks.size() &&
                    stacks[s.image_slot] != nullptr,
                "train_tree: sample references missing channel stack ", s.image_slot);

    std::vector<int> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return patch_sample_before(samples[a], samples[b]);
    });

    detail::TreeBuilder builder{samples, stacks, config, {}, {}};
    builder.build(idx, derive_seed(tree_seed, 0x6e6f6465ULL), 0);
    if (stats) *stats = builder.stats;
    return builder.tree;
}

}  // namespace sobd
