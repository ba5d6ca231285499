#pragma once

// k-means++ seeding plus Lloyd iterations, deterministic per seed.

#include <limits>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/linalg.hpp"
#include "sobd/parallel.hpp"
#include "sobd/random.hpp"

namespace sobd {

// k-means++ D^2 sampling; returns k distinct sample indices when the data
// allows it. Falls back to uniform picks once every remaining point
// coincides with a chosen center.
inline std::vector<std::size_t> kmeanspp_indices(const MatrixD& samples, int k, Rng& rng) {
    const std::size_t n = samples.rows;
    require(k > 0 && static_cast<std::size_t>(k) <= n, "kmeans++: need 1 <= k <= sample count");
    std::vector<std::size_t> picks;
    picks.reserve(k);
    picks.push_back(rng.uniform_int(n));

    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (picks.size() < static_cast<std::size_t>(k)) {
        const double* latest = samples.row(picks.back());
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = squared_distance(samples.row(i), latest, samples.cols);
            if (d < d2[i]) d2[i] = d;
            total += d2[i];
        }
        if (total <= 0.0) {
            picks.push_back(rng.uniform_int(n));
            continue;
        }
        // Zero-weight points (already centers) must stay unselectable even
        // when r lands exactly on a cumulative boundary.
        const double r = rng.uniform() * total;
        double cum = 0.0;
        std::size_t chosen = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            chosen = i;
            cum += d2[i];
            if (cum >= r) break;
        }
        picks.push_back(chosen);
    }
    return picks;
}

struct KMeansResult {
    MatrixD centroids;            // k x dim
    std::vector<int> assignment;  // per sample, [0, k)
    std::vector<double> objective_history;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Nearest centroid by squared distance; ties go to the lowest index.
inline int nearest_centroid(const MatrixD& centroids, const double* x, std::size_t dim,
                            double* dist_out = nullptr) {
    int best = 0;
    double best_d = squared_distance(centroids.row(0), x, dim);
    for (std::size_t c = 1; c < centroids.rows; ++c) {
        const double d = squared_distance(centroids.row(c), x, dim);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

}  // namespace detail

inline KMeansResult kmeans(const MatrixD& samples, int k, std::uint64_t seed,
                           int max_iters = 100, const WarnSink& sink = {}) {
    const std::size_t n = samples.rows, dim = samples.cols;
    require(k > 0, "kmeans: k must be positive");
    require(static_cast<std::size_t>(k) <= n, "kmeans: fewer points (", n, ") than clusters (", k,
            ")");

    Rng rng(seed);
    KMeansResult result;
    result.centroids = MatrixD(k, dim, 0.0);
    {
        const auto picks = kmeanspp_indices(samples, k, rng);
        for (int c = 0; c < k; ++c) {
            const double* src = samples.row(picks[c]);
            std::copy(src, src + dim, result.centroids.row(c));
        }
    }
    result.assignment.assign(n, -1);
    std::vector<double> dists(n);

    for (int iter = 0; iter < max_iters; ++iter) {
        result.iterations = iter + 1;

        bool changed = false;
        std::vector<int> next(n);
        parallel_for(std::size_t{0}, n, [&](std::size_t i) {
            next[i] = detail::nearest_centroid(result.centroids, samples.row(i), dim, &dists[i]);
        });
        for (std::size_t i = 0; i < n; ++i) {
            if (next[i] != result.assignment[i]) changed = true;
            result.assignment[i] = next[i];
        }

        // Empty clusters grab the point currently farthest from its centroid.
        std::vector<std::size_t> counts(k, 0);
        for (int a : result.assignment) ++counts[a];
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (dists[i] > dists[far]) far = i;
            warn(sink, str_cat("kmeans: cluster ", c, " went empty; re-seeded to sample ", far));
            --counts[result.assignment[far]];
            result.assignment[far] = c;
            counts[c] = 1;
            dists[far] = 0.0;
            changed = true;
        }

        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            objective += squared_distance(samples.row(i),
                                          result.centroids.row(result.assignment[i]), dim);
        result.objective_history.push_back(objective);

        if (!changed) {
            result.converged = true;
            break;
        }

        MatrixD sums(k, dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = samples.row(i);
            double* s = sums.row(result.assignment[i]);
            for (std::size_t j = 0; j < dim; ++j) s[j] += x[j];
        }
        for (int c = 0; c < k; ++c) {
            double* ctr = result.centroids.row(c);
            const double inv = 1.0 / static_cast<double>(counts[c]);
            const double* s = sums.row(c);
            for (std::size_t j = 0; j < dim; ++j) ctr[j] = s[j] * inv;
        }
    }

    // Report centroids consistent with the final assignment.
    {
        std::vector<std::size_t> counts(k, 0);
        MatrixD sums(k, dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[result.assignment[i]];
            const double* x = samples.row(i);
            double* s = sums.row(result.assignment[i]);
            for (std::size_t j = 0; j < dim; ++j) s[j] += x[j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            double* ctr = result.centroids.row(c);
            const double inv = 1.0 / static_cast<double>(counts[c]);
            for (std::size_t j = 0; j < dim; ++j) ctr[j] = sums.row(c)[j] * inv;
        }
    }
    return result;
}

}  // namespace sobd
