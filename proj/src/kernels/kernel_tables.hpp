#pragma once

// Internal: per-variant kernel tables, defined in their own translation
// units and wired up by the dispatcher.

#include "elulab/kernels.hpp"

namespace elulab::kernels {

namespace scalar {
extern const KernelTable kTable;
}

#ifdef ELULAB_HAVE_AVX2_TU
namespace avx2 {
extern const KernelTable kTable;
}
#endif

} // namespace elulab::kernels
