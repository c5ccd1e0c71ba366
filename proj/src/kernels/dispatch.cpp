#include <cstdlib>
#include <string_view>

#include "arflow/kernels.hpp"
#include "kernels_impl.hpp"

namespace arflow::kernels {

const KernelTable* avx2_table() {
#if defined(ARFLOW_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  if (supported) return &detail::avx2_table_impl();
#endif
  return nullptr;
}

const KernelTable* neon_table() {
#if defined(ARFLOW_HAVE_NEON)
  return &detail::neon_table_impl();
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* pick() {
  const char* env = std::getenv("ARFLOW_SIMD");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return &scalar_table();
  if (want == "avx2" && avx2_table()) return avx2_table();
  if (want == "neon" && neon_table()) return neon_table();
  if (avx2_table()) return avx2_table();
  if (neon_table()) return neon_table();
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = pick();
  return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

void set_active(const KernelTable& table) { current() = &table; }

}  // namespace arflow::kernels
