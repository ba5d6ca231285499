#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "sobd/base.hpp"

namespace sobd {

// Dense row-major matrix. Small and dumb on purpose; the heavy lifting in
// this library is loops over it, not operator algebra.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

    T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    T* row(std::size_t r) { return data.data() + r * cols; }
    const T* row(std::size_t r) const { return data.data() + r * cols; }
    bool empty() const { return rows == 0 || cols == 0; }
};

using MatrixD = Matrix<double>;
using MatrixF = Matrix<float>;

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double norm2(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

struct EigenDecomposition {
    std::vector<double> values;  // descending
    MatrixD vectors;             // column j pairs with values[j]
};

// Cyclic Jacobi eigensolver for symmetric matrices. Plenty for the sizes
// used here (covariances up to a few hundred square); eigenpairs come back
// sorted by descending eigenvalue with a fixed sign convention (the entry
// of largest magnitude in each vector is positive).
inline EigenDecomposition jacobi_eigen_symmetric(MatrixD a, int max_sweeps = 64) {
    const int n = a.rows;
    require(a.rows == a.cols, "jacobi_eigen_symmetric: matrix must be square");
    MatrixD v(n, n, 0.0);
    for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-30) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a.at(i, p);
                    const double aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a.at(p, i);
                    const double aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v.at(i, p);
                    const double viq = v.at(i, q);
                    v.at(i, p) = c * vip - s * viq;
                    v.at(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a.at(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return diag[x] > diag[y]; });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = MatrixD(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        out.values[j] = diag[src];
        int arg = 0;
        double best = 0.0;
        for (int i = 0; i < n; ++i) {
            const double m = std::abs(v.at(i, src));
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        const double sign = v.at(arg, src) >= 0.0 ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) out.vectors.at(i, j) = sign * v.at(i, src);
    }
    return out;
}

// Top eigenvector of a PSD matrix given only a matrix-vector product.
// `start` fixes the iterate, so the result is deterministic.
template <typename MatVec>
std::vector<double> power_iteration(int dim, const MatVec& multiply,
                                    const std::vector<double>& start, int iterations) {
    std::vector<double> u = start;
    double n0 = norm2(u.data(), dim);
    if (n0 <= 0.0) {
        u.assign(dim, 0.0);
        u[0] = 1.0;
        n0 = 1.0;
    }
    for (auto& x : u) x /= n0;
    std::vector<double> w(dim);
    for (int it = 0; it < iterations; ++it) {
        multiply(u, w);
        const double nw = norm2(w.data(), dim);
        if (nw < 1e-300) break;  // matrix is (numerically) zero along u
        for (int i = 0; i < dim; ++i) u[i] = w[i] / nw;
    }
    return u;
}

}  // namespace sobd
