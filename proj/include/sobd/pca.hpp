#pragma once

// Principal component analysis via the symmetric Jacobi eigensolver.

#include <vector>

#include "sobd/base.hpp"
#include "sobd/linalg.hpp"
#include "sobd/parallel.hpp"

namespace sobd {

struct PcaModel {
    std::vector<double> mean;  // D
    MatrixD basis;             // D x d, orthonormal columns, descending variance

    int input_dim() const { return static_cast<int>(mean.size()); }
    int output_dim() const { return static_cast<int>(basis.cols); }

    template <typename T>
    void project(const T* in, double* out) const {
        const int D = input_dim(), d = output_dim();
        for (int j = 0; j < d; ++j) out[j] = 0.0;
        for (int i = 0; i < D; ++i) {
            const double c = static_cast<double>(in[i]) - mean[i];
            const double* brow = basis.row(i);
            for (int j = 0; j < d; ++j) out[j] += c * brow[j];
        }
    }

    std::vector<double> project(const std::vector<double>& in) const {
        require(static_cast<int>(in.size()) == input_dim(), "pca project: dimension mismatch");
        std::vector<double> out(output_dim());
        project(in.data(), out.data());
        return out;
    }

    void reconstruct(const double* code, double* out) const {
        const int D = input_dim(), d = output_dim();
        for (int i = 0; i < D; ++i) {
            double v = mean[i];
            const double* brow = basis.row(i);
            for (int j = 0; j < d; ++j) v += brow[j] * code[j];
            out[i] = v;
        }
    }

    std::vector<double> reconstruct(const std::vector<double>& code) const {
        require(static_cast<int>(code.size()) == output_dim(),
                "pca reconstruct: dimension mismatch");
        std::vector<double> out(input_dim());
        reconstruct(code.data(), out.data());
        return out;
    }
};

// Fits mean and top-d principal directions of the row samples. Covariance is
// the population form (divide by N); accumulation runs in fixed chunks so the
// result is identical for any thread count.
template <typename T>
PcaModel fit_pca(const Matrix<T>& samples, int d) {
    const std::size_t n = samples.rows;
    const int D = static_cast<int>(samples.cols);
    require(d > 0 && d <= D, "fit_pca: target dimension out of range");
    require(n > static_cast<std::size_t>(d), "fit_pca: insufficient samples (need > ", d,
            ", got ", n, ")");

    struct Acc {
        std::vector<double> sum;
        std::vector<double> outer;  // upper triangle of sum x xT, row-major packed
    };
    const int tri = D * (D + 1) / 2;
    Acc total = parallel_chunked_reduce<Acc>(
        n,
        [&]() {
            return Acc{std::vector<double>(D, 0.0), std::vector<double>(tri, 0.0)};
        },
        [&](Acc& acc, std::size_t i) {
            const T* row = samples.row(i);
            int t = 0;
            for (int a = 0; a < D; ++a) {
                const double va = static_cast<double>(row[a]);
                acc.sum[a] += va;
                for (int b = a; b < D; ++b, ++t)
                    acc.outer[t] += va * static_cast<double>(row[b]);
            }
        },
        [](Acc& into, const Acc& from) {
            for (std::size_t i = 0; i < into.sum.size(); ++i) into.sum[i] += from.sum[i];
            for (std::size_t i = 0; i < into.outer.size(); ++i) into.outer[i] += from.outer[i];
        });

    PcaModel model;
    model.mean.resize(D);
    for (int i = 0; i < D; ++i) model.mean[i] = total.sum[i] / static_cast<double>(n);

    MatrixD cov(D, D, 0.0);
    int t = 0;
    for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b, ++t) {
            const double c =
                total.outer[t] / static_cast<double>(n) - model.mean[a] * model.mean[b];
            cov.at(a, b) = c;
            cov.at(b, a) = c;
        }

    EigenDecomposition eig = jacobi_eigen_symmetric(cov);
    model.basis = MatrixD(D, d, 0.0);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < d; ++j) model.basis.at(i, j) = eig.vectors.at(i, j);
    return model;
}

}  // namespace sobd
