#pragma once
// Precision/recall scoring of soft boundary maps: threshold, thin, match,
// then either per-image averaging (dataset curves) or per-class count
// pooling (semantic contours). Curves are summarized by AP over the
// monotonized curve and interpolated precision at fixed recall levels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/boundaries.hpp"
#include "sobd/image.hpp"
#include "sobd/matching.hpp"
#include "sobd/parallel.hpp"

namespace sobd {

struct PRCurve {
    std::vector<double> thresholds;  // strictly descending, in (0,1]
    std::vector<double> precision;   // aligned with thresholds
    std::vector<double> recall;
    double ap = 0.0;
    double p_at_20 = 0.0;
    double p_at_50 = 0.0;
};

// 25 thresholds uniformly covering (0,1], descending.
inline std::vector<double> default_thresholds() {
    std::vector<double> t(25);
    for (int i = 0; i < 25; ++i) t[i] = (25 - i) / 25.0;
    return t;
}

// Match tolerance as a fraction of the image diagonal.
inline double tolerance_radius(int width, int height, double frac) {
    require(frac > 0.0, "evaluate: tolerance fraction must be positive");
    return frac * std::hypot(static_cast<double>(width), static_cast<double>(height));
}

inline constexpr double kDefaultToleranceFrac = 0.0075;

namespace detail {

// Points reordered by ascending recall, precision replaced by the running
// max from the high-recall side so the curve is non-increasing.
struct MonotoneCurve {
    std::vector<double> recall, precision;
};

inline MonotoneCurve monotonize(const std::vector<double>& recall,
                                const std::vector<double>& precision) {
    const std::size_t n = recall.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return recall[a] < recall[b];
    });
    MonotoneCurve out;
    out.recall.resize(n);
    out.precision.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.recall[i] = recall[order[i]];
        out.precision[i] = precision[order[i]];
    }
    for (std::size_t i = n; i-- > 1;)
        out.precision[i - 1] = std::max(out.precision[i - 1], out.precision[i]);
    return out;
}

}  // namespace detail

// Trapezoidal area under the monotonized curve, extended flat from the
// smallest observed recall down to 0 and treated as 0 past the largest.
inline double average_precision(const std::vector<double>& recall,
                                const std::vector<double>& precision) {
    require(!recall.empty() && recall.size() == precision.size(),
            "evaluate: curve arrays empty or mismatched");
    const detail::MonotoneCurve c = detail::monotonize(recall, precision);
    double ap = c.recall.front() * c.precision.front();
    for (std::size_t i = 1; i < c.recall.size(); ++i)
        ap += (c.recall[i] - c.recall[i - 1]) * 0.5 * (c.precision[i] + c.precision[i - 1]);
    return ap;
}

// Linear interpolation on the monotonized curve; flat below the smallest
// recall sample, 0 above the largest.
inline double precision_at(const std::vector<double>& recall,
                           const std::vector<double>& precision, double r) {
    require(!recall.empty() && recall.size() == precision.size(),
            "evaluate: curve arrays empty or mismatched");
    const detail::MonotoneCurve c = detail::monotonize(recall, precision);
    if (r <= c.recall.front()) return c.precision.front();
    if (r > c.recall.back()) return 0.0;
    std::size_t j = 1;
    while (c.recall[j] < r) ++j;
    const double r0 = c.recall[j - 1];
    const double r1 = c.recall[j];
    const double t = (r - r0) / (r1 - r0);
    return c.precision[j - 1] + t * (c.precision[j] - c.precision[j - 1]);
}

namespace detail {

struct MatchCounts {
    std::int64_t tp = 0, fp = 0, fn = 0;
};

inline MatchCounts threshold_counts(const BoundaryMap& soft, const BoundaryMap& gt,
                                    double threshold, double tol) {
    const BoundaryMap thin = boundary_thin(soft, threshold);
    const MatchResult m = match_boundaries(thin, gt, tol);
    return {m.true_positives, m.false_positives, m.false_negatives};
}

inline double precision_of(std::int64_t tp, std::int64_t fp) {
    return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

inline void check_thresholds(const std::vector<double>& t) {
    require(!t.empty(), "evaluate: no thresholds");
    for (std::size_t i = 0; i < t.size(); ++i) {
        require(t[i] > 0.0 && t[i] <= 1.0, "evaluate: threshold ", t[i],
                " outside (0,1]");
        if (i > 0)
            require(t[i] < t[i - 1], "evaluate: thresholds must be strictly descending");
    }
}

inline void summarize(PRCurve& c) {
    c.ap = average_precision(c.recall, c.precision);
    c.p_at_20 = precision_at(c.recall, c.precision, 0.20);
    c.p_at_50 = precision_at(c.recall, c.precision, 0.50);
}

}  // namespace detail

// Single-image curve. tol is an absolute pixel radius.
inline PRCurve pr_curve(const BoundaryMap& pred_soft, const BoundaryMap& gt,
                        const std::vector<double>& thresholds, double tol) {
    require_same_shape(pred_soft, gt, "evaluate");
    detail::check_thresholds(thresholds);
    require(count_positive(gt) > 0, "evaluate: ground truth has no boundary pixels");

    std::vector<detail::MatchCounts> counts(thresholds.size());
    parallel_for(0, thresholds.size(), [&](std::size_t t) {
        counts[t] = detail::threshold_counts(pred_soft, gt, thresholds[t], tol);
    });
    PRCurve out;
    out.thresholds = thresholds;
    out.precision.resize(thresholds.size());
    out.recall.resize(thresholds.size());
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        out.precision[t] = detail::precision_of(counts[t].tp, counts[t].fp);
        out.recall[t] = static_cast<double>(counts[t].tp) /
                        static_cast<double>(counts[t].tp + counts[t].fn);
    }
    detail::summarize(out);
    return out;
}

// Per-image precision and recall averaged across images at each threshold,
// then summarized from the averaged curve. Images with empty ground truth
// are skipped with a warning. tol_frac scales each image's own diagonal.
inline PRCurve dataset_eval(const std::vector<BoundaryMap>& preds,
                            const std::vector<BoundaryMap>& gts, double tol_frac,
                            const std::vector<double>& thresholds,
                            WarnSink sink = {}) {
    require(!preds.empty(), "evaluate: empty dataset");
    require(preds.size() == gts.size(),
            "evaluate: prediction/ground-truth count mismatch");
    detail::check_thresholds(thresholds);

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        require_same_shape(preds[i], gts[i], "evaluate");
        if (count_positive(gts[i]) > 0)
            usable.push_back(i);
        else
            warn(sink, str_cat("evaluate: image ", i, " has empty ground truth, skipped"));
    }
    require(!usable.empty(), "evaluate: every image has empty ground truth");

    const std::size_t nt = thresholds.size();
    std::vector<detail::MatchCounts> counts(usable.size() * nt);
    parallel_for(0, counts.size(), [&](std::size_t u) {
        const std::size_t img = usable[u / nt];
        const double tol = tolerance_radius(gts[img].width, gts[img].height, tol_frac);
        counts[u] = detail::threshold_counts(preds[img], gts[img],
                                             thresholds[u % nt], tol);
    });

    PRCurve out;
    out.thresholds = thresholds;
    out.precision.assign(nt, 0.0);
    out.recall.assign(nt, 0.0);
    for (std::size_t u = 0; u < counts.size(); ++u) {
        const std::size_t t = u % nt;
        out.precision[t] += detail::precision_of(counts[u].tp, counts[u].fp);
        out.recall[t] += static_cast<double>(counts[u].tp) /
                         static_cast<double>(counts[u].tp + counts[u].fn);
    }
    for (std::size_t t = 0; t < nt; ++t) {
        out.precision[t] /= static_cast<double>(usable.size());
        out.recall[t] /= static_cast<double>(usable.size());
    }
    detail::summarize(out);
    return out;
}

struct SbdClassInput {
    int class_id = 0;
    std::vector<BoundaryMap> preds;  // semantic contour maps, one per test image
    std::vector<BoundaryMap> gts;    // single-class ground truth, aligned
};

struct SbdClassResult {
    int class_id = 0;
    double ap = 0.0;
    PRCurve curve;
};

struct SbdResult {
    std::vector<SbdClassResult> classes;  // evaluated classes, input order
    std::vector<int> excluded_classes;    // no ground truth in the test split
    double mean_ap = 0.0;
};

// Per class: pool tp/fp/fn over images at each threshold (count pooling,
// not curve averaging), then AP per class and the mean over evaluated
// classes. Classes without any ground truth are excluded and logged.
inline SbdResult sbd_eval(const std::vector<SbdClassInput>& inputs, double tol_frac,
                          const std::vector<double>& thresholds, WarnSink sink = {}) {
    require(!inputs.empty(), "evaluate: no classes");
    detail::check_thresholds(thresholds);
    SbdResult out;
    double ap_sum = 0.0;
    for (const SbdClassInput& in : inputs) {
        require(!in.preds.empty() && in.preds.size() == in.gts.size(),
                "evaluate: class ", in.class_id, " prediction/ground-truth mismatch");
        bool any_gt = false;
        for (std::size_t i = 0; i < in.gts.size(); ++i) {
            require_same_shape(in.preds[i], in.gts[i], "evaluate");
            if (count_positive(in.gts[i]) > 0) any_gt = true;
        }
        if (!any_gt) {
            warn(sink, str_cat("evaluate: class ", in.class_id,
                               " has no ground truth in the test split, excluded"));
            out.excluded_classes.push_back(in.class_id);
            continue;
        }
        const std::size_t nt = thresholds.size();
        std::vector<detail::MatchCounts> counts(in.preds.size() * nt);
        parallel_for(0, counts.size(), [&](std::size_t u) {
            const std::size_t img = u / nt;
            const double tol =
                tolerance_radius(in.gts[img].width, in.gts[img].height, tol_frac);
            counts[u] = detail::threshold_counts(in.preds[img], in.gts[img],
                                                 thresholds[u % nt], tol);
        });
        SbdClassResult cls;
        cls.class_id = in.class_id;
        cls.curve.thresholds = thresholds;
        cls.curve.precision.assign(nt, 0.0);
        cls.curve.recall.assign(nt, 0.0);
        for (std::size_t t = 0; t < nt; ++t) {
            detail::MatchCounts pooled;
            for (std::size_t img = 0; img < in.preds.size(); ++img) {
                const detail::MatchCounts& c = counts[img * nt + t];
                pooled.tp += c.tp;
                pooled.fp += c.fp;
                pooled.fn += c.fn;
            }
            cls.curve.precision[t] = detail::precision_of(pooled.tp, pooled.fp);
            cls.curve.recall[t] = static_cast<double>(pooled.tp) /
                                  static_cast<double>(pooled.tp + pooled.fn);
        }
        detail::summarize(cls.curve);
        cls.ap = cls.curve.ap;
        ap_sum += cls.ap;
        out.classes.push_back(std::move(cls));
    }
    require(!out.classes.empty(), "evaluate: no class has ground truth");
    out.mean_ap = ap_sum / static_cast<double>(out.classes.size());
    return out;
}

}  // namespace sobd
