// Compiled with -mavx2 only (no -mfma): the exact routines must round like the
// scalar reference.
#include <immintrin.h>

#include <cmath>

#include "arflow/kernels.hpp"
#include "kernels_impl.hpp"

namespace arflow::kernels::detail {

namespace {

constexpr std::size_t kLanes = 4;

inline void axpy_row(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + j));
    _mm256_storeu_pd(y + j, _mm256_add_pd(_mm256_loadu_pd(y + j), prod));
  }
  for (; j < n; ++j) y[j] = y[j] + alpha * x[j];
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) axpy_row(n, a[i * k + p], b + p * n, c + i * n);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) axpy_row(n, a[i * k + p], b + i * n, c + p * n);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      __m256d acc = _mm256_setzero_pd();
      std::size_t j = 0;
      for (; j + kLanes <= n; j += kLanes)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(ai + j), _mm256_loadu_pd(bp + j)));
      double tail = 0.0;
      for (; j < n; ++j) tail += ai[j] * bp[j];
      c[i * k + p] += hsum(acc) + tail;
    }
  }
}

template <typename VecOp, typename ScalarOp>
inline void binary(std::size_t n, const double* x, const double* y, double* z, VecOp vop, ScalarOp sop) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    _mm256_storeu_pd(z + i, vop(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) z[i] = sop(x[i], y[i]);
}

void add(std::size_t n, const double* x, const double* y, double* z) {
  binary(n, x, y, z, [](__m256d a, __m256d b) { return _mm256_add_pd(a, b); },
         [](double a, double b) { return a + b; });
}
void sub(std::size_t n, const double* x, const double* y, double* z) {
  binary(n, x, y, z, [](__m256d a, __m256d b) { return _mm256_sub_pd(a, b); },
         [](double a, double b) { return a - b; });
}
void mul(std::size_t n, const double* x, const double* y, double* z) {
  binary(n, x, y, z, [](__m256d a, __m256d b) { return _mm256_mul_pd(a, b); },
         [](double a, double b) { return a * b; });
}

void axpy(std::size_t n, double alpha, const double* x, double* y) { axpy_row(n, alpha, x, y); }

void fma_acc(std::size_t n, const double* x, const double* w, double* y) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + x[i] * w[i];
}

double sum(std::size_t n, const double* x) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + kLanes));
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i];
  return hsum(_mm256_add_pd(acc0, acc1)) + tail;
}

void adam(std::size_t n, double* param, const double* grad, double* m, double* v, const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bias1 = _mm256_set1_pd(c.bias1);
  const __m256d bias2 = _mm256_set1_pd(c.bias2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, g));
    const __m256d vi =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, bias1);
    const __m256d vhat = _mm256_div_pd(vi, bias2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double mhat = m[i] / c.bias1;
    const double vhat = v[i] / c.bias2;
    param[i] = param[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

const KernelTable kAvx2{"avx2", gemm_nn, gemm_tn, gemm_nt, add, sub, mul, axpy, fma_acc, sum, adam};

}  // namespace

const KernelTable& avx2_table_impl() { return kAvx2; }

}  // namespace arflow::kernels::detail
