#pragma once

// Weighted combination of situational boundary predictions: probability-
// weighted averaging over the selected situations, plus unnormalized
// class-specific semantic contours.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/channels.hpp"
#include "sobd/edge_forest.hpp"
#include "sobd/gating.hpp"
#include "sobd/image.hpp"
#include "sobd/parallel.hpp"
#include "sobd/situations.hpp"

namespace sobd {

struct SituationalPrediction {
    int situation_id = 0;
    double probability = 0.0;
    BoundaryMap map;
};

// Per-pixel weighted average sum_j p_j * D_j / sum_j p_j. Weights are
// normalized up front, accumulation runs in double in the given order, and
// the result is clamped to [0,1] to absorb roundoff at the top of the
// range.
inline BoundaryMap fuse(const std::vector<SituationalPrediction>& preds) {
    require(!preds.empty(), "fuse: no predictions");
    double z = 0.0;
    for (const SituationalPrediction& p : preds) {
        require(p.probability >= 0.0, "fuse: negative probability for situation ",
                p.situation_id);
        require_same_shape(preds[0].map, p.map, "fuse");
        z += p.probability;
    }
    require(z > 0.0, "fuse: total probability mass is zero");

    const int w = preds[0].map.width, h = preds[0].map.height;
    std::vector<double> weights(preds.size());
    for (std::size_t j = 0; j < preds.size(); ++j) weights[j] = preds[j].probability / z;

    BoundaryMap out(w, h, 0.0f);
    parallel_for(0, h, [&](std::int64_t y) {
        const std::size_t row = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::size_t j = 0; j < preds.size(); ++j)
                acc += weights[j] * preds[j].map.values[row + x];
            out.values[row + x] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    });
    return out;
}

// What the fused prediction was built from: the selected situations in
// descending probability order and their total mass Z.
struct SelectionLog {
    std::vector<SelectedSituation> selected;
    double z = 0.0;
};

struct FusedPrediction {
    BoundaryMap map;
    SelectionLog log;
};

enum class SelectionMode { fixed_n, mass };

struct SelectionRule {
    SelectionMode mode = SelectionMode::fixed_n;
    int n = 5;
    double mass = 0.7;
};

// Fixed-n selection clamps n to the situation count so a small model still
// honors the default n=5.
inline std::vector<SelectedSituation> select_situations(const std::vector<double>& probs,
                                                        const SelectionRule& rule) {
    if (rule.mode == SelectionMode::fixed_n) {
        require(rule.n >= 1, "select_situations: need n >= 1, got ", rule.n);
        return top_n_situations(probs, std::min<int>(rule.n, static_cast<int>(probs.size())));
    }
    return top_mass_situations(probs, rule.mass);
}

// Runs only the selected situations' forests on the image and fuses their
// maps. Forest evaluations are parallel; fusion accumulates in ascending
// situation-id order, so the output is deterministic for any thread count.
inline FusedPrediction fused_situational_predict(
    const ChannelStack& stack, const std::vector<double>& probs,
    const std::vector<const EdgeForest*>& forests, const SelectionRule& rule) {
    require(probs.size() == forests.size(), "situational_predict: ", probs.size(),
            " probabilities for ", forests.size(), " forests");

    FusedPrediction out;
    out.log.selected = select_situations(probs, rule);
    for (const SelectedSituation& s : out.log.selected) out.log.z += s.probability;

    std::vector<SituationalPrediction> preds(out.log.selected.size());
    parallel_for(0, static_cast<std::int64_t>(out.log.selected.size()), [&](std::int64_t i) {
        const SelectedSituation& s = out.log.selected[i];
        require(forests[s.id] != nullptr, "situational_predict: missing forest for situation ",
                s.id);
        preds[i].situation_id = s.id;
        preds[i].probability = s.probability;
        preds[i].map = predict_on_channels(*forests[s.id], stack);
    });
    std::sort(preds.begin(), preds.end(),
              [](const SituationalPrediction& a, const SituationalPrediction& b) {
                  return a.situation_id < b.situation_id;
              });
    out.map = fuse(preds);
    return out;
}

inline FusedPrediction fused_situational_predict(
    const Image& image, const std::vector<double>& probs,
    const std::vector<const EdgeForest*>& forests, const SelectionRule& rule) {
    return fused_situational_predict(compute_channels(image), probs, forests, rule);
}

// Class-specific contour map: gate probability of class c times the class-c
// forest's map. Deliberately not renormalized, so output strength scales
// with the gate's confidence in the class.
inline BoundaryMap semantic_contour(const ChannelStack& stack,
                                    const SituationPartition& partition,
                                    const std::vector<double>& probs,
                                    const std::vector<const EdgeForest*>& forests,
                                    int class_id) {
    require(partition.kind == SituationKind::class_specific,
            "semantic_contour: needs a class partition (kind is ", to_string(partition.kind),
            ")");
    require(probs.size() == static_cast<std::size_t>(partition.k()) &&
                forests.size() == probs.size(),
            "semantic_contour: partition/gate/forest size mismatch");
    const Situation* hit = nullptr;
    for (const Situation& s : partition.situations)
        if (s.class_id == class_id) hit = &s;
    require(hit != nullptr, "semantic_contour: no situation for class ", class_id);
    require(forests[hit->id] != nullptr, "semantic_contour: missing forest for situation ",
            hit->id);

    const double p = probs[hit->id];
    BoundaryMap map = predict_on_channels(*forests[hit->id], stack);
    for (float& v : map.values) v = static_cast<float>(p * v);
    return map;
}

}  // namespace sobd
