#pragma once

// Independent reference implementations used to pin expected values in tests.
// Everything here is written the slow, obvious way on purpose — plain loops,
// no shared code with the library — so a library bug cannot hide by agreeing
// with itself.

#include <cmath>
#include <cstddef>
#include <vector>

#include "elulab/rng.hpp"
#include "elulab/types.hpp"

namespace oracle {

// C = A(m x k, lda) * B(n x k, ldb)^T, written into c (ldc), overwriting.
inline void matmul_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) s += a[i * lda + l] * b[j * ldb + l];
            c[i * ldc + j] = s;
        }
}

// C = A(m x k, lda) * B(k x n, ldb)
inline void matmul_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) s += a[i * lda + l] * b[l * ldb + j];
            c[i * ldc + j] = s;
        }
}

// C = A(k x m, lda)^T * B(k x n, ldb)
inline void matmul_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) s += a[l * lda + i] * b[l * ldb + j];
            c[i * ldc + j] = s;
        }
}

// Row-major matrix product of elulab::Matrix values via the triple loop.
inline elulab::Matrix matmul(const elulab::Matrix& a, const elulab::Matrix& b) {
    elulab::Matrix c(a.rows, b.cols);
    matmul_nn(a.rows, b.cols, a.cols, a.data.data(), a.cols, b.data.data(), b.cols,
              c.data.data(), c.cols);
    return c;
}

inline std::vector<double> random_vec(std::size_t n, elulab::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

// Central finite difference of a scalar function of one coordinate.
template <typename F>
double fdiff(F f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Random symmetric positive definite matrix, comfortably conditioned.
inline elulab::Matrix spd_matrix(std::size_t n, elulab::Rng& rng) {
    elulab::Matrix g(n, n);
    for (auto& v : g.data) v = 2.0 * rng.uniform() - 1.0;
    elulab::Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < n; ++l) s += g(l, i) * g(l, j);
            m(i, j) = s / double(n);
        }
    const double shift = 0.2 + 0.8 * rng.uniform();
    for (std::size_t i = 0; i < n; ++i) m(i, i) += shift;
    return m;
}

inline double max_abs_diff(const elulab::Matrix& a, const elulab::Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

} // namespace oracle
