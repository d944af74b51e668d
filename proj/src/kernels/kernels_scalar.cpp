// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against; keep them simple enough to audit by eye.

#include "elulab/kernels.hpp"
#include "kernel_tables.hpp"

namespace elulab::kernels::scalar {

double dot(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(std::size_t n, double alpha, double* x) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void sgd_update(std::size_t n, double lr, double momentum, const double* g, double* v, double* w) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = momentum * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * lda;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * ldb;
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
            if (accumulate)
                c[i * ldc + j] += acc;
            else
                c[i * ldc + j] = acc;
        }
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + i * lda;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ai[l];
            const double* bl = b + l * ldb;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
        const double* al = a + l * lda;
        const double* bl = b + l * ldb;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = al[i];
            double* ci = c + i * ldc;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

const KernelTable kTable = {
    dot, axpy, scale, sgd_update, gemm_nt, gemm_nn, gemm_tn,
};

} // namespace elulab::kernels::scalar
