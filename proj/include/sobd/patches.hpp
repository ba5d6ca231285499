#pragma once

// Balanced training-patch sampling for the structured forest: half the
// budget centered on ground-truth boundary pixels, half on non-boundary
// pixels, spread uniformly across a situation's images.

#include <array>
#include <cstdint>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/boundaries.hpp"
#include "sobd/channels.hpp"
#include "sobd/image.hpp"
#include "sobd/random.hpp"

namespace sobd {

// One 32x32 training window. Features are computed lazily from the image's
// ChannelStack; the stored target is the segment-id patch of the central
// 16x16 window.
struct PatchSample {
    int image_slot = 0;  // index into the situation's image list
    int x0 = 0;          // even full-res window origin
    int y0 = 0;
    std::array<std::uint16_t, kMaskSize * kMaskSize> target{};
};

inline bool patch_sample_before(const PatchSample& a, const PatchSample& b) {
    if (a.image_slot != b.image_slot) return a.image_slot < b.image_slot;
    if (a.y0 != b.y0) return a.y0 < b.y0;
    return a.x0 < b.x0;
}

namespace detail {

struct PatchCandidates {
    std::vector<std::uint32_t> positive;  // packed (y0 << 16 | x0), boundary at center
    std::vector<std::uint32_t> negative;
};

// Window origins are even so features align with the half-res channel
// planes; a "positive" window has a ground-truth boundary pixel at its
// center (x0+16, y0+16).
inline PatchCandidates enumerate_candidates(const LabeledSegmentation& seg) {
    PatchCandidates out;
    const BoundaryMap gt = extract_gt_boundaries(seg);
    const int mx = max_window_origin(seg.width), my = max_window_origin(seg.height);
    for (int y0 = 0; y0 <= my; y0 += 2)
        for (int x0 = 0; x0 <= mx; x0 += 2) {
            const std::uint32_t packed =
                (static_cast<std::uint32_t>(y0) << 16) | static_cast<std::uint32_t>(x0);
            if (gt.at(x0 + kPatchSize / 2, y0 + kPatchSize / 2) > 0.0f)
                out.positive.push_back(packed);
            else
                out.negative.push_back(packed);
        }
    return out;
}

// quota draws from pool: distinct while the pool suffices, then with
// replacement.
inline void draw_from_pool(const std::vector<std::uint32_t>& pool, int quota, Rng& rng,
                           std::vector<std::uint32_t>& out) {
    if (quota <= 0 || pool.empty()) return;
    if (static_cast<std::size_t>(quota) <= pool.size()) {
        std::vector<std::uint32_t> copy = pool;
        for (int i = 0; i < quota; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.uniform_int(copy.size() - i));
            std::swap(copy[i], copy[j]);
            out.push_back(copy[i]);
        }
    } else {
        out.insert(out.end(), pool.begin(), pool.end());
        for (std::size_t i = pool.size(); i < static_cast<std::size_t>(quota); ++i)
            out.push_back(pool[rng.uniform_int(pool.size())]);
    }
}

inline PatchSample make_sample(const LabeledSegmentation& seg, int slot, std::uint32_t packed) {
    PatchSample s;
    s.image_slot = slot;
    s.x0 = static_cast<int>(packed & 0xffffu);
    s.y0 = static_cast<int>(packed >> 16);
    const int cx = s.x0 + (kPatchSize - kMaskSize) / 2;  // central 16x16 origin
    const int cy = s.y0 + (kPatchSize - kMaskSize) / 2;
    for (int dy = 0; dy < kMaskSize; ++dy)
        for (int dx = 0; dx < kMaskSize; ++dx)
            s.target[dy * kMaskSize + dx] = seg.segment_at(cx + dx, cy + dy);
    return s;
}

}  // namespace detail

// Draws `budget` samples across the images: per-image quotas differ by at
// most one, and each image's quota is split (pos+1)/2 positive, rest
// negative. Images lacking a candidate kind push their share into a
// shortfall pool redistributed round-robin over the images that do have
// candidates. Deterministic per seed and input order.
inline std::vector<PatchSample> sample_patches(
    const std::vector<const LabeledSegmentation*>& segs, int budget, std::uint64_t seed,
    const WarnSink& sink = {}) {
    require(!segs.empty(), "sample_patches: no images");
    require(budget > 0, "sample_patches: budget must be positive, got ", budget);
    const int n = static_cast<int>(segs.size());

    std::vector<detail::PatchCandidates> cands(n);
    for (int i = 0; i < n; ++i) {
        const LabeledSegmentation& seg = *segs[i];
        require(seg.width >= kMinForestImageSide && seg.height >= kMinForestImageSide,
                "sample_patches: image ", i, " smaller than ", kMinForestImageSide, "x",
                kMinForestImageSide);
        cands[i] = detail::enumerate_candidates(seg);
    }

    bool any_positive = false, any_negative = false;
    for (const auto& c : cands) {
        any_positive = any_positive || !c.positive.empty();
        any_negative = any_negative || !c.negative.empty();
    }
    require(any_positive,
            "sample_patches: situation has no boundary-centered windows; situation unusable");

    std::vector<PatchSample> samples;
    samples.reserve(budget);
    int pos_shortfall = 0, neg_shortfall = 0;
    for (int i = 0; i < n; ++i) {
        const int quota = budget / n + (i < budget % n ? 1 : 0);
        const int pos_quota = (quota + 1) / 2;
        const int neg_quota = quota - pos_quota;
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::vector<std::uint32_t> picks;
        if (cands[i].positive.empty())
            pos_shortfall += pos_quota;
        else
            detail::draw_from_pool(cands[i].positive, pos_quota, rng, picks);
        if (cands[i].negative.empty())
            neg_shortfall += neg_quota;
        else
            detail::draw_from_pool(cands[i].negative, neg_quota, rng, picks);
        for (std::uint32_t p : picks) samples.push_back(detail::make_sample(*segs[i], i, p));
    }

    if (pos_shortfall + neg_shortfall > 0) {
        warn(sink, str_cat("sample_patches: redistributing ", pos_shortfall,
                           " positive and ", neg_shortfall,
                           " negative draws from candidate-starved images"));
        Rng rng(derive_seed(seed, 0x7265646fULL));
        auto redistribute = [&](int count, bool positive) {
            int img = 0;
            while (count > 0) {
                const std::vector<std::uint32_t>& pool =
                    positive ? cands[img].positive : cands[img].negative;
                if (!pool.empty()) {
                    samples.push_back(detail::make_sample(
                        *segs[img], img, pool[rng.uniform_int(pool.size())]));
                    --count;
                }
                img = (img + 1) % n;
            }
        };
        redistribute(pos_shortfall, true);
        if (neg_shortfall > 0) {
            if (any_negative) {
                redistribute(neg_shortfall, false);
            } else {
                warn(sink, str_cat("sample_patches: no negative windows anywhere; drawing ",
                                   neg_shortfall, " extra positives"));
                redistribute(neg_shortfall, true);
            }
        }
    }
    return samples;
}

}  // namespace sobd
