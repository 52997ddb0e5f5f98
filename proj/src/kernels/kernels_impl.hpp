#pragma once

#include "raterlab/kernels.hpp"

namespace raterlab::kernels {

namespace scalar {
extern const KernelTable table;
}

#if defined(RATERLAB_HAVE_AVX2)
namespace avx2 {
extern const KernelTable table;
}
#endif

}  // namespace raterlab::kernels
