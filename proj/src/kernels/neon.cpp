// aarch64 only; NEON is baseline there so no extra target flags are needed.
#include <arm_neon.h>

#include <cmath>

#include "arflow/kernels.hpp"
#include "kernels_impl.hpp"

namespace arflow::kernels::detail {

namespace {

constexpr std::size_t kLanes = 2;

inline void axpy_row(std::size_t n, double alpha, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t j = 0;
  for (; j + kLanes <= n; j += kLanes)
    vst1q_f64(y + j, vaddq_f64(vld1q_f64(y + j), vmulq_f64(va, vld1q_f64(x + j))));
  for (; j < n; ++j) y[j] = y[j] + alpha * x[j];
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
      float64x2_t acc = vdupq_n_f64(0.0);
      std::size_t j = 0;
      for (; j + kLanes <= n; j += kLanes) acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(ai + j), vld1q_f64(bp + j)));
      double tail = 0.0;
      for (; j < n; ++j) tail += ai[j] * bp[j];
      c[i * k + p] += vaddvq_f64(acc) + tail;
    }
  }
}

void add(std::size_t n, const double* x, const double* y, double* z) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(z + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) z[i] = x[i] + y[i];
}
void sub(std::size_t n, const double* x, const double* y, double* z) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(z + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) z[i] = x[i] - y[i];
}
void mul(std::size_t n, const double* x, const double* y, double* z) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(z + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) z[i] = x[i] * y[i];
}

void axpy(std::size_t n, double alpha, const double* x, double* y) { axpy_row(n, alpha, x, y); }

void fma_acc(std::size_t n, const double* x, const double* w, double* y) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(vld1q_f64(x + i), vld1q_f64(w + i))));
  for (; i < n; ++i) y[i] = y[i] + x[i] * w[i];
}

double sum(std::size_t n, const double* x) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i];
  return vaddvq_f64(acc) + tail;
}

void adam(std::size_t n, double* param, const double* grad, double* m, double* v, const AdamCoeffs& c) {
  const float64x2_t b1 = vdupq_n_f64(c.beta1);
  const float64x2_t b2 = vdupq_n_f64(c.beta2);
  const float64x2_t omb1 = vdupq_n_f64(1.0 - c.beta1);
  const float64x2_t omb2 = vdupq_n_f64(1.0 - c.beta2);
  const float64x2_t bias1 = vdupq_n_f64(c.bias1);
  const float64x2_t bias2 = vdupq_n_f64(c.bias2);
  const float64x2_t lr = vdupq_n_f64(c.lr);
  const float64x2_t eps = vdupq_n_f64(c.eps);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(omb1, g));
    const float64x2_t vi = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(omb2, vmulq_f64(g, g)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t mhat = vdivq_f64(mi, bias1);
    const float64x2_t vhat = vdivq_f64(vi, bias2);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, mhat), vaddq_f64(vsqrtq_f64(vhat), eps));
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
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

const KernelTable kNeon{"neon", gemm_nn, gemm_tn, gemm_nt, add, sub, mul, axpy, fma_acc, sum, adam};

}  // namespace

const KernelTable& neon_table_impl() { return kNeon; }

}  // namespace arflow::kernels::detail
