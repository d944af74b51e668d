// Micro-benchmark for the kernel variants. Prints GFLOP/s per GEMM shape so
// the scalar/AVX2 gap stays visible; shapes mirror the training hot loops
// (batch x width x width products).

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "elulab/kernels.hpp"
#include "elulab/rng.hpp"

namespace ek = elulab::kernels;
using clk = std::chrono::steady_clock;

namespace {

double bench_gemm(const ek::KernelTable& t, std::size_t m, std::size_t n, std::size_t k) {
    elulab::Rng rng(42);
    std::vector<double> a(m * k), b(n * k), c(m * n);
    for (auto& x : a) x = rng.uniform() - 0.5;
    for (auto& x : b) x = rng.uniform() - 0.5;

    const double flop = 2.0 * double(m) * double(n) * double(k);
    // warm up, then time enough reps for ~0.3s
    t.gemm_nt(m, n, k, a.data(), k, b.data(), k, c.data(), n, false);
    int reps = std::max(1, int(3e8 / flop));
    const auto t0 = clk::now();
    for (int r = 0; r < reps; ++r)
        t.gemm_nt(m, n, k, a.data(), k, b.data(), k, c.data(), n, false);
    const double sec = std::chrono::duration<double>(clk::now() - t0).count();
    return flop * reps / sec / 1e9;
}

} // namespace

int main() {
    struct Shape {
        std::size_t m, n, k;
    };
    const Shape shapes[] = {
        {64, 128, 784}, {64, 128, 128}, {64, 10, 128},   {256, 256, 256},
        {64, 512, 784}, {512, 512, 512}, {2048, 128, 784},
    };

    std::printf("%-18s %12s %12s\n", "m x n x k", "scalar", "avx2");
    for (const auto& s : shapes) {
        const std::string label = std::to_string(s.m) + " x " + std::to_string(s.n) + " x " +
                                  std::to_string(s.k);
        const double gs = bench_gemm(ek::table(ek::Isa::scalar), s.m, s.n, s.k);
        double gv = 0.0;
        if (ek::isa_supported(ek::Isa::avx2))
            gv = bench_gemm(ek::table(ek::Isa::avx2), s.m, s.n, s.k);
        std::printf("%-18s %9.2f GF %9.2f GF\n", label.c_str(), gs, gv);
    }
    std::printf("active variant: %s\n", ek::isa_name(ek::active_isa()));
    return 0;
}
