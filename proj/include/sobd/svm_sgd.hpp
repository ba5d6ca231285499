#pragma once

// Binary linear SVM trained by SGD on the hinge loss with L2 regularization.
// Learning rate 1/(lambda*(t+t0)) with t0 = 1/lambda, weight-scale trick so
// the regularization shrink is O(1), unregularized bias, and the returned
// weights are the average over the final epoch.

#include <cmath>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/linalg.hpp"
#include "sobd/random.hpp"

namespace sobd {

struct LinearModel {
    std::vector<float> weights;
    double bias = 0.0;

    int dim() const { return static_cast<int>(weights.size()); }

    double score(const float* x) const {
        double s = bias;
        for (std::size_t i = 0; i < weights.size(); ++i)
            s += static_cast<double>(weights[i]) * x[i];
        return s;
    }
};

struct SvmConfig {
    double lambda = 1e-4;
    // Probability that an SGD step draws a positive example.
    double pos_freq = 0.25;
    int epochs = 10;
};

inline LinearModel train_linear_svm(const MatrixF& x, const std::vector<std::uint8_t>& positive,
                                    const SvmConfig& cfg, std::uint64_t seed) {
    const std::size_t n = x.rows, dim = x.cols;
    require(n > 0 && positive.size() == n, "train_linear_svm: bad label array");
    require(cfg.lambda > 0.0 && cfg.epochs > 0, "train_linear_svm: bad config");
    require(cfg.pos_freq > 0.0 && cfg.pos_freq < 1.0, "train_linear_svm: pos_freq in (0,1)");

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (positive[i] ? pos : neg).push_back(i);
    require(!pos.empty(), "train_linear_svm: no positive examples");

    Rng rng(seed);
    std::vector<double> v(dim, 0.0);
    double scale = 1.0, bias = 0.0;
    std::vector<double> avg_w(dim, 0.0);
    double avg_b = 0.0;

    const double t0 = 1.0 / cfg.lambda;
    const long steps_per_epoch = static_cast<long>(n);
    const long total = steps_per_epoch * cfg.epochs;
    const long last_epoch_start = total - steps_per_epoch;
    long t = 0;

    for (long step = 0; step < total; ++step, ++t) {
        std::size_t i;
        if (neg.empty() || rng.uniform() < cfg.pos_freq)
            i = pos[rng.uniform_int(pos.size())];
        else
            i = neg[rng.uniform_int(neg.size())];
        const double y = positive[i] ? 1.0 : -1.0;
        const float* xi = x.row(i);

        const double eta = 1.0 / (cfg.lambda * (static_cast<double>(t + 1) + t0));
        double margin = bias;
        for (std::size_t j = 0; j < dim; ++j) margin += scale * v[j] * xi[j];
        margin *= y;

        scale *= 1.0 - eta * cfg.lambda;
        if (margin < 1.0) {
            const double g = eta * y / scale;
            for (std::size_t j = 0; j < dim; ++j) v[j] += g * xi[j];
            bias += eta * y;
        }
        if (scale < 1e-100) {  // fold the scale back in before it underflows
            for (double& w : v) w *= scale;
            scale = 1.0;
        }

        if (step >= last_epoch_start) {
            for (std::size_t j = 0; j < dim; ++j) avg_w[j] += scale * v[j];
            avg_b += bias;
        }
    }

    LinearModel model;
    model.weights.resize(dim);
    const double inv = 1.0 / static_cast<double>(steps_per_epoch);
    for (std::size_t j = 0; j < dim; ++j)
        model.weights[j] = static_cast<float>(avg_w[j] * inv);
    model.bias = avg_b * inv;
    return model;
}

// Average precision of ranking the rows by descending score; positives are
// the relevant items. Ties and equal scores resolve by ascending row index.
inline double ranking_average_precision(const std::vector<double>& scores,
                                        const std::vector<std::uint8_t>& positive) {
    require(scores.size() == positive.size(), "ranking_average_precision: size mismatch");
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    std::size_t npos = 0;
    for (std::uint8_t p : positive) npos += p ? 1 : 0;
    if (npos == 0) return 0.0;
    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (!positive[order[rank]]) continue;
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
    return ap / static_cast<double>(npos);
}

}  // namespace sobd
