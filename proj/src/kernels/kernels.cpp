#include "elulab/kernels.hpp"

#include <cstdlib>
#include <string>

#include "elulab/errors.hpp"
#include "kernel_tables.hpp"

namespace elulab::kernels {

namespace {

bool cpu_has_avx2() {
#ifdef ELULAB_HAVE_AVX2_TU
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect() {
    if (const char* env = std::getenv("ELULAB_KERNELS")) {
        const std::string v(env);
        if (v == "scalar") return Isa::scalar;
        if (v == "avx2") {
            if (!cpu_has_avx2())
                throw ConfigError("ELULAB_KERNELS=avx2 but this CPU/build has no AVX2 support");
            return Isa::avx2;
        }
        throw ConfigError("ELULAB_KERNELS must be 'scalar' or 'avx2', got '" + v + "'");
    }
    return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

Isa& active_slot() {
    static Isa isa = detect();
    return isa;
}

} // namespace

Isa active_isa() { return active_slot(); }

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

void force_isa(Isa isa) {
    if (!isa_supported(isa))
        throw ConfigError(std::string("kernel variant '") + isa_name(isa) +
                          "' is not supported on this CPU/build");
    active_slot() = isa;
}

const KernelTable& table(Isa isa) {
#ifdef ELULAB_HAVE_AVX2_TU
    if (isa == Isa::avx2) return avx2::kTable;
#else
    if (isa == Isa::avx2)
        throw ConfigError("kernel variant 'avx2' is not compiled into this build");
#endif
    return scalar::kTable;
}

const KernelTable& active() { return table(active_slot()); }

} // namespace elulab::kernels
