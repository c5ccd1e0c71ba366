#pragma once

#include <cstddef>

// Dense inner loops used by the autodiff engine and the optimizer.
//
// Each routine exists as a portable scalar reference and, where the build and
// the CPU allow it, as an AVX2 (x86-64) or NEON (aarch64) variant. The variant
// is chosen once at startup; ARFLOW_SIMD=scalar|avx2|neon overrides it.
//
// Routines marked "exact" perform the same IEEE operations in the same order in
// every variant, so results are bit-identical. The reductions (gemm_nt, sum)
// reassociate and agree only to rounding.

namespace arflow::kernels {

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

struct KernelTable {
  const char* name;

  // exact: C[m,n] += A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // exact: C[k,n] += A[m,k]^T * B[m,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // C[m,k] += A[m,n] * B[k,n]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

  // exact elementwise: z = x (op) y
  void (*add)(std::size_t n, const double* x, const double* y, double* z);
  void (*sub)(std::size_t n, const double* x, const double* y, double* z);
  void (*mul)(std::size_t n, const double* x, const double* y, double* z);
  // exact: y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // exact: y += x * w
  void (*fma_acc)(std::size_t n, const double* x, const double* w, double* y);

  double (*sum)(std::size_t n, const double* x);

  // exact: one bias-corrected Adam update of n parameters
  void (*adam)(std::size_t n, double* param, const double* grad, double* m, double* v, const AdamCoeffs& c);
};

const KernelTable& scalar_table();
/// nullptr when the build has no AVX2 variant or the CPU lacks AVX2.
const KernelTable* avx2_table();
/// nullptr when the build has no NEON variant.
const KernelTable* neon_table();

/// Table used by the engine.
const KernelTable& active();
/// Replace the active table (tests, benchmarks). Not thread-safe.
void set_active(const KernelTable& table);

}  // namespace arflow::kernels
