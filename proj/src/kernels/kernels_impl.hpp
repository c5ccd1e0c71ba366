#pragma once

#include "arflow/kernels.hpp"

namespace arflow::kernels::detail {

#if defined(ARFLOW_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif
#if defined(ARFLOW_HAVE_NEON)
const KernelTable& neon_table_impl();
#endif

}  // namespace arflow::kernels::detail
