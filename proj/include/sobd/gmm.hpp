#pragma once

// Diagonal-covariance Gaussian mixture fitted by EM with k-means++ init.

#include <cmath>
#include <limits>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/kmeans.hpp"
#include "sobd/linalg.hpp"
#include "sobd/parallel.hpp"
#include "sobd/random.hpp"

namespace sobd {

struct GmmModel {
    std::vector<double> weights;  // K, sums to 1
    MatrixD means;                // K x d
    MatrixD variances;            // K x d, >= variance floor

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return static_cast<int>(means.cols); }

    // log w_k + log N(x | mean_k, diag var_k)
    double log_weighted_density(int k, const double* x) const {
        const int d = dim();
        const double* mu = means.row(k);
        const double* var = variances.row(k);
        double acc = std::log(weights[k]) - 0.5 * d * std::log(2.0 * 3.14159265358979323846);
        for (int i = 0; i < d; ++i) {
            const double z = x[i] - mu[i];
            acc -= 0.5 * (std::log(var[i]) + z * z / var[i]);
        }
        return acc;
    }

    // Fills posterior responsibilities; returns log p(x).
    double posteriors(const double* x, double* gamma) const {
        const int K = components();
        double max_log = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            gamma[k] = log_weighted_density(k, x);
            if (gamma[k] > max_log) max_log = gamma[k];
        }
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(gamma[k] - max_log);
        const double log_px = max_log + std::log(sum);
        for (int k = 0; k < K; ++k) gamma[k] = std::exp(gamma[k] - log_px);
        return log_px;
    }

    double log_density(const double* x) const {
        std::vector<double> gamma(components());
        return posteriors(x, gamma.data());
    }

    // Average log-likelihood of row samples.
    double average_log_likelihood(const MatrixD& samples) const {
        require(samples.cols == static_cast<std::size_t>(dim()), "gmm: dimension mismatch");
        const double total = parallel_chunked_reduce<double>(
            samples.rows, []() { return 0.0; },
            [&](double& acc, std::size_t i) { acc += log_density(samples.row(i)); },
            [](double& into, const double& from) { into += from; });
        return total / static_cast<double>(samples.rows);
    }
};

struct GmmFitReport {
    std::vector<double> loglik_history;  // average log-likelihood per EM iteration
    int iterations = 0;
    bool converged = false;
    int reseeded_components = 0;
};

inline GmmModel fit_gmm(const MatrixD& samples, int K, std::uint64_t seed,
                        GmmFitReport* report = nullptr, const WarnSink& sink = {},
                        double variance_floor = 1e-6, int max_iters = 200,
                        double rel_tol = 1e-6) {
    const std::size_t n = samples.rows;
    const int d = static_cast<int>(samples.cols);
    require(K > 0, "fit_gmm: component count must be positive");
    require(n >= static_cast<std::size_t>(10) * K, "fit_gmm: insufficient samples (need >= ",
            10 * K, ", got ", n, ")");

    Rng rng(derive_seed(seed, 0x676d6dULL));  // "gmm" stream

    GmmModel model;
    model.weights.assign(K, 1.0 / K);
    model.means = MatrixD(K, d, 0.0);
    model.variances = MatrixD(K, d, 0.0);

    // Init: k-means++ picked samples as means, global per-dim variance.
    {
        const auto picks = kmeanspp_indices(samples, K, rng);
        for (int k = 0; k < K; ++k) {
            const double* src = samples.row(picks[k]);
            std::copy(src, src + d, model.means.row(k));
        }
        std::vector<double> mean(d, 0.0), var(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = samples.row(i);
            for (int j = 0; j < d; ++j) mean[j] += x[j];
        }
        for (int j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = samples.row(i);
            for (int j = 0; j < d; ++j) {
                const double z = x[j] - mean[j];
                var[j] += z * z;
            }
        }
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < d; ++j)
                model.variances.at(k, j) =
                    std::max(var[j] / static_cast<double>(n), variance_floor);
    }

    GmmFitReport local_report;
    GmmFitReport& rep = report ? *report : local_report;
    rep = GmmFitReport{};

    struct Acc {
        std::vector<double> nk;        // K
        std::vector<double> sum_x;     // K*d
        std::vector<double> sum_xx;    // K*d
        double loglik = 0.0;
        double worst_ll = std::numeric_limits<double>::infinity();
        std::size_t worst_index = 0;
    };

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        rep.iterations = iter + 1;

        Acc stats = parallel_chunked_reduce<Acc>(
            n,
            [&]() {
                Acc a;
                a.nk.assign(K, 0.0);
                a.sum_x.assign(static_cast<std::size_t>(K) * d, 0.0);
                a.sum_xx.assign(static_cast<std::size_t>(K) * d, 0.0);
                return a;
            },
            [&](Acc& acc, std::size_t i) {
                const double* x = samples.row(i);
                std::vector<double> gamma(K);
                const double ll = model.posteriors(x, gamma.data());
                acc.loglik += ll;
                if (ll < acc.worst_ll) {
                    acc.worst_ll = ll;
                    acc.worst_index = i;
                }
                for (int k = 0; k < K; ++k) {
                    const double g = gamma[k];
                    if (g == 0.0) continue;
                    acc.nk[k] += g;
                    double* sx = &acc.sum_x[static_cast<std::size_t>(k) * d];
                    double* sxx = &acc.sum_xx[static_cast<std::size_t>(k) * d];
                    for (int j = 0; j < d; ++j) {
                        sx[j] += g * x[j];
                        sxx[j] += g * x[j] * x[j];
                    }
                }
            },
            [](Acc& into, const Acc& from) {
                for (std::size_t k = 0; k < into.nk.size(); ++k) into.nk[k] += from.nk[k];
                for (std::size_t i = 0; i < into.sum_x.size(); ++i) {
                    into.sum_x[i] += from.sum_x[i];
                    into.sum_xx[i] += from.sum_xx[i];
                }
                into.loglik += from.loglik;
                if (from.worst_ll < into.worst_ll) {
                    into.worst_ll = from.worst_ll;
                    into.worst_index = from.worst_index;
                }
            });

        const double avg_ll = stats.loglik / static_cast<double>(n);
        rep.loglik_history.push_back(avg_ll);

        // M step.
        bool reseeded = false;
        for (int k = 0; k < K; ++k) {
            const double nk = stats.nk[k];
            if (nk < 1e-8) {
                // Collapsed component: restart it at a poorly modeled sample.
                const std::size_t pick =
                    reseeded ? rng.uniform_int(n) : stats.worst_index;
                reseeded = true;
                ++rep.reseeded_components;
                warn(sink, str_cat("fit_gmm: component ", k,
                                   " lost all responsibility; re-seeded to sample ", pick));
                const double* src = samples.row(pick);
                std::copy(src, src + d, model.means.row(k));
                double var_mean = 0.0;
                for (int kk = 0; kk < K; ++kk)
                    for (int j = 0; j < d; ++j) var_mean += model.variances.at(kk, j);
                var_mean /= static_cast<double>(K) * d;
                for (int j = 0; j < d; ++j) model.variances.at(k, j) = var_mean;
                model.weights[k] = 1.0 / static_cast<double>(K);
                continue;
            }
            model.weights[k] = nk / static_cast<double>(n);
            double* mu = model.means.row(k);
            double* var = model.variances.row(k);
            const double* sx = &stats.sum_x[static_cast<std::size_t>(k) * d];
            const double* sxx = &stats.sum_xx[static_cast<std::size_t>(k) * d];
            for (int j = 0; j < d; ++j) {
                mu[j] = sx[j] / nk;
                var[j] = std::max(sxx[j] / nk - mu[j] * mu[j], variance_floor);
            }
        }
        double wsum = 0.0;
        for (double w : model.weights) wsum += w;
        for (double& w : model.weights) w /= wsum;

        if (!reseeded && iter > 0) {
            const double rel = (avg_ll - prev_ll) / std::max(std::abs(prev_ll), 1e-300);
            if (rel < rel_tol) {
                rep.converged = true;
                break;
            }
        }
        prev_ll = avg_ll;
    }
    return model;
}

}  // namespace sobd
