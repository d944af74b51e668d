// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma and must only be entered after the dispatcher has checked
// CPUID; everything else in the library stays at the baseline ISA.
//
// GEMM uses the usual packed-panel scheme: op(A) is packed into 6-row
// panels, op(B) into 8-column panels, and a 6x8 register-tile micro-kernel
// runs FMAs over the shared k dimension. Edge tiles go through a small
// stack buffer. Strides are normalized during packing, so one driver
// serves the nt/nn/tn entry points.

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "elulab/kernels.hpp"
#include "kernel_tables.hpp"

namespace elulab::kernels::avx2 {
namespace {

constexpr std::size_t MR = 6;
constexpr std::size_t NR = 8;

thread_local std::vector<double> g_pack_a;
thread_local std::vector<double> g_pack_b;

void pack_a(std::size_t m, std::size_t k, const double* a, std::size_t sr, std::size_t sc,
            double* pa) {
    const std::size_t panels = (m + MR - 1) / MR;
    for (std::size_t p = 0; p < panels; ++p) {
        double* dst = pa + p * k * MR;
        const std::size_t i0 = p * MR;
        const std::size_t mr = std::min(MR, m - i0);
        for (std::size_t l = 0; l < k; ++l) {
            for (std::size_t r = 0; r < mr; ++r) dst[l * MR + r] = a[(i0 + r) * sr + l * sc];
            for (std::size_t r = mr; r < MR; ++r) dst[l * MR + r] = 0.0;
        }
    }
}

void pack_b(std::size_t n, std::size_t k, const double* b, std::size_t sr, std::size_t sc,
            double* pb) {
    const std::size_t panels = (n + NR - 1) / NR;
    for (std::size_t p = 0; p < panels; ++p) {
        double* dst = pb + p * k * NR;
        const std::size_t j0 = p * NR;
        const std::size_t nr = std::min(NR, n - j0);
        for (std::size_t l = 0; l < k; ++l) {
            for (std::size_t c = 0; c < nr; ++c) dst[l * NR + c] = b[l * sr + (j0 + c) * sc];
            for (std::size_t c = nr; c < NR; ++c) dst[l * NR + c] = 0.0;
        }
    }
}

// C tile (6x8) = packed panel product; writes tile rows to `c` with stride ldc.
void kernel_6x8(std::size_t k, const double* pa, const double* pb, double* c, std::size_t ldc,
                bool accumulate) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
    __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();

    for (std::size_t l = 0; l < k; ++l) {
        const __m256d b0 = _mm256_loadu_pd(pb + l * NR);
        const __m256d b1 = _mm256_loadu_pd(pb + l * NR + 4);
        const double* al = pa + l * MR;
        __m256d av;
        av = _mm256_broadcast_sd(al + 0);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(al + 1);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(al + 2);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(al + 3);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
        av = _mm256_broadcast_sd(al + 4);
        c40 = _mm256_fmadd_pd(av, b0, c40);
        c41 = _mm256_fmadd_pd(av, b1, c41);
        av = _mm256_broadcast_sd(al + 5);
        c50 = _mm256_fmadd_pd(av, b0, c50);
        c51 = _mm256_fmadd_pd(av, b1, c51);
    }

    __m256d* acc[MR][2] = {{&c00, &c01}, {&c10, &c11}, {&c20, &c21},
                           {&c30, &c31}, {&c40, &c41}, {&c50, &c51}};
    for (std::size_t r = 0; r < MR; ++r) {
        double* cr = c + r * ldc;
        if (accumulate) {
            _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), *acc[r][0]));
            _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), *acc[r][1]));
        } else {
            _mm256_storeu_pd(cr, *acc[r][0]);
            _mm256_storeu_pd(cr + 4, *acc[r][1]);
        }
    }
}

void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t sa_r,
                  std::size_t sa_c, const double* b, std::size_t sb_r, std::size_t sb_c, double* c,
                  std::size_t ldc, bool accumulate) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate)
            for (std::size_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, n * sizeof(double));
        return;
    }

    const std::size_t a_panels = (m + MR - 1) / MR;
    const std::size_t b_panels = (n + NR - 1) / NR;
    g_pack_a.resize(a_panels * k * MR);
    g_pack_b.resize(b_panels * k * NR);
    pack_a(m, k, a, sa_r, sa_c, g_pack_a.data());
    pack_b(n, k, b, sb_r, sb_c, g_pack_b.data());

    alignas(32) double tile[MR * NR];
    for (std::size_t p = 0; p < a_panels; ++p) {
        const std::size_t i0 = p * MR;
        const std::size_t mr = std::min(MR, m - i0);
        const double* pa = g_pack_a.data() + p * k * MR;
        for (std::size_t q = 0; q < b_panels; ++q) {
            const std::size_t j0 = q * NR;
            const std::size_t nr = std::min(NR, n - j0);
            const double* pb = g_pack_b.data() + q * k * NR;
            if (mr == MR && nr == NR) {
                kernel_6x8(k, pa, pb, c + i0 * ldc + j0, ldc, accumulate);
            } else {
                kernel_6x8(k, pa, pb, tile, NR, false);
                for (std::size_t r = 0; r < mr; ++r) {
                    double* cr = c + (i0 + r) * ldc + j0;
                    if (accumulate)
                        for (std::size_t cc = 0; cc < nr; ++cc) cr[cc] += tile[r * NR + cc];
                    else
                        for (std::size_t cc = 0; cc < nr; ++cc) cr[cc] = tile[r * NR + cc];
                }
            }
        }
    }
}

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

} // namespace

double dot(std::size_t n, const double* x, const double* y) {
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
        a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), a2);
        a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), a3);
    }
    for (; i + 4 <= n; i += 4)
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double acc = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(std::size_t n, double alpha, double* x) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void sgd_update(std::size_t n, double lr, double momentum, const double* g, double* v, double* w) {
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d mv = _mm256_set1_pd(momentum);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // v = momentum*v - lr*g
        __m256d vv = _mm256_fnmadd_pd(lrv, _mm256_loadu_pd(g + i),
                                      _mm256_mul_pd(mv, _mm256_loadu_pd(v + i)));
        _mm256_storeu_pd(v + i, vv);
        _mm256_storeu_pd(w + i, _mm256_add_pd(_mm256_loadu_pd(w + i), vv));
    }
    for (; i < n; ++i) {
        v[i] = momentum * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    gemm_strided(m, n, k, a, lda, 1, b, 1, ldb, c, ldc, accumulate);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    gemm_strided(m, n, k, a, lda, 1, b, ldb, 1, c, ldc, accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    gemm_strided(m, n, k, a, 1, lda, b, ldb, 1, c, ldc, accumulate);
}

const KernelTable kTable = {
    dot, axpy, scale, sgd_update, gemm_nt, gemm_nn, gemm_tn,
};

} // namespace elulab::kernels::avx2
