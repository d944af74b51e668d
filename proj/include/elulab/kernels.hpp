#pragma once

#include <cstddef>
#include <string>

namespace elulab::kernels {

// Data-parallel f64 kernels behind every hot loop. Each entry point has a
// scalar reference implementation and an AVX2+FMA variant; the active set is
// picked once at startup from CPUID and can be forced (tests, env override
// ELULAB_KERNELS=scalar|avx2). Results are deterministic for a fixed variant.

enum class Isa { scalar, avx2 };

Isa active_isa();
const char* isa_name(Isa isa);
bool isa_supported(Isa isa);

/// Force a specific variant (throws ConfigError if unsupported on this CPU).
void force_isa(Isa isa);

struct KernelTable {
    // sum_i x[i]*y[i]
    double (*dot)(std::size_t n, const double* x, const double* y);
    // y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    // x *= alpha
    void (*scale)(std::size_t n, double alpha, double* x);
    // v = momentum*v - lr*g ; w += v
    void (*sgd_update)(std::size_t n, double lr, double momentum, const double* g, double* v, double* w);

    // GEMM family. C is m x n row-major with leading dimension ldc.
    // When accumulate is false C is overwritten, otherwise added to.
    // gemm_nt: C = A(m x k, lda) * B(n x k, ldb)^T     (rows dot rows)
    // gemm_nn: C = A(m x k, lda) * B(k x n, ldb)
    // gemm_tn: C = A(k x m, lda)^T * B(k x n, ldb)
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
};

const KernelTable& table(Isa isa);
const KernelTable& active();

// Convenience forwarders through the active table.
inline double dot(std::size_t n, const double* x, const double* y) { return active().dot(n, x, y); }
inline void axpy(std::size_t n, double alpha, const double* x, double* y) { active().axpy(n, alpha, x, y); }
inline void scale(std::size_t n, double alpha, double* x) { active().scale(n, alpha, x); }
inline void sgd_update(std::size_t n, double lr, double momentum, const double* g, double* v, double* w) {
    active().sgd_update(n, lr, momentum, g, v, w);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate = false) {
    active().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate = false) {
    active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate = false) {
    active().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

} // namespace elulab::kernels
