#pragma once

// Fisher-vector encoding of a local descriptor field under a PCA + diagonal
// GMM model: mean and standard-deviation gradients of the average
// log-likelihood, signed square root, per-region L2 normalization, spatial
// layout = whole image plus three horizontal bands.

#include <array>
#include <cmath>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/dense_sift.hpp"
#include "sobd/gmm.hpp"
#include "sobd/linalg.hpp"
#include "sobd/parallel.hpp"
#include "sobd/pca.hpp"

namespace sobd {

using GlobalDescriptor = std::vector<float>;

inline constexpr int kFisherRegions = 4;  // whole + 3 horizontal bands

inline int fisher_dim(int K, int d, int regions = kFisherRegions) {
    return 2 * K * d * regions;
}

inline void signed_sqrt(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        v[i] = v[i] >= 0.0 ? std::sqrt(v[i]) : -std::sqrt(-v[i]);
}

// Raw (pre-normalization) Fisher block over the selected projected
// descriptors. Layout: first K*d mean gradients, then K*d deviation
// gradients, component-major. With T = subset size, sigma = sqrt(var):
//   out_mean[k,i] = (1/(T*sqrt(w_k)))   * sum_t gamma_t(k) * (x_ti - mu_ki)/sigma_ki
//   out_std [k,i] = (1/(T*sqrt(2 w_k))) * sum_t gamma_t(k) * (((x_ti - mu_ki)/sigma_ki)^2 - 1)
// These equal (sigma_ki/sqrt(w_k)) * d/dmu and (sigma_ki/sqrt(2 w_k)) * d/dsigma
// of the average log-likelihood; tests verify against finite differences
// with exactly that scaling.
inline std::vector<double> fisher_raw_block(const GmmModel& gmm, const MatrixD& proj,
                                            const MatrixD& gamma,
                                            const std::vector<std::size_t>& subset) {
    const int K = gmm.components(), d = gmm.dim();
    std::vector<double> out(static_cast<std::size_t>(2) * K * d, 0.0);
    if (subset.empty()) return out;

    struct Acc {
        std::vector<double> sum;  // 2*K*d, same layout as out
    };
    Acc total = parallel_chunked_reduce<Acc>(
        subset.size(),
        [&]() { return Acc{std::vector<double>(out.size(), 0.0)}; },
        [&](Acc& acc, std::size_t si) {
            const std::size_t t = subset[si];
            const double* x = proj.row(t);
            const double* g = gamma.row(t);
            for (int k = 0; k < K; ++k) {
                if (g[k] == 0.0) continue;
                const double* mu = gmm.means.row(k);
                const double* var = gmm.variances.row(k);
                double* am = &acc.sum[static_cast<std::size_t>(k) * d];
                double* as = &acc.sum[static_cast<std::size_t>(K + k) * d];
                for (int i = 0; i < d; ++i) {
                    const double z = (x[i] - mu[i]) / std::sqrt(var[i]);
                    am[i] += g[k] * z;
                    as[i] += g[k] * (z * z - 1.0);
                }
            }
        },
        [](Acc& into, const Acc& from) {
            for (std::size_t i = 0; i < into.sum.size(); ++i) into.sum[i] += from.sum[i];
        });

    const double inv_t = 1.0 / static_cast<double>(subset.size());
    for (int k = 0; k < K; ++k) {
        const double wm = inv_t / std::sqrt(gmm.weights[k]);
        const double ws = inv_t / std::sqrt(2.0 * gmm.weights[k]);
        for (int i = 0; i < d; ++i) {
            out[static_cast<std::size_t>(k) * d + i] =
                total.sum[static_cast<std::size_t>(k) * d + i] * wm;
            out[static_cast<std::size_t>(K + k) * d + i] =
                total.sum[static_cast<std::size_t>(K + k) * d + i] * ws;
        }
    }
    return out;
}

// Horizontal band of a patch center: 0, 1 or 2 top to bottom.
inline int fisher_band(double center_y, int image_height) {
    const int band = static_cast<int>(3.0 * center_y / image_height);
    return std::clamp(band, 0, 2);
}

inline GlobalDescriptor fisher_encode(const LocalDescriptorField& field, const PcaModel& pca,
                                      const GmmModel& gmm) {
    require(field.count() > 0, "fisher_encode: empty descriptor field");
    require(pca.input_dim() == field.dim(), "fisher_encode: PCA input dim ", pca.input_dim(),
            " != descriptor dim ", field.dim());
    require(gmm.dim() == pca.output_dim(), "fisher_encode: GMM dim ", gmm.dim(),
            " != PCA output dim ", pca.output_dim());

    const std::size_t T = static_cast<std::size_t>(field.count());
    const int K = gmm.components(), d = gmm.dim();

    MatrixD proj(T, d, 0.0);
    MatrixD gamma(T, K, 0.0);
    parallel_for(std::size_t{0}, T, [&](std::size_t t) {
        pca.project(field.descriptors.row(t), proj.row(t));
        gmm.posteriors(proj.row(t), gamma.row(t));
    });

    std::array<std::vector<std::size_t>, kFisherRegions> members;
    members[0].resize(T);
    for (std::size_t t = 0; t < T; ++t) members[0][t] = t;
    for (std::size_t t = 0; t < T; ++t)
        members[1 + fisher_band(field.center_y(static_cast<int>(t)), field.image_height)]
            .push_back(t);

    const std::size_t block = static_cast<std::size_t>(2) * K * d;
    GlobalDescriptor out(block * kFisherRegions, 0.0f);
    for (int r = 0; r < kFisherRegions; ++r) {
        if (members[r].empty()) continue;  // empty region keeps a zero block
        std::vector<double> raw = fisher_raw_block(gmm, proj, gamma, members[r]);
        signed_sqrt(raw.data(), raw.size());
        double norm = 0.0;
        for (double v : raw) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-12) continue;
        for (std::size_t i = 0; i < block; ++i)
            out[block * r + i] = static_cast<float>(raw[i] / norm);
    }
    return out;
}

}  // namespace sobd
