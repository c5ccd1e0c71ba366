#include <cmath>

#include "arflow/kernels.hpp"
#include "kernels_impl.hpp"

namespace arflow::kernels {

namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] = ci[j] + aip * bp[j];
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] = cp[j] + aip * bi[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c[i * k + p] += acc;
    }
  }
}

void add(std::size_t n, const double* x, const double* y, double* z) {
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}
void sub(std::size_t n, const double* x, const double* y, double* z) {
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - y[i];
}
void mul(std::size_t n, const double* x, const double* y, double* z) {
  for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}
void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}
void fma_acc(std::size_t n, const double* x, const double* w, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + x[i] * w[i];
}

double sum(std::size_t n, const double* x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void adam(std::size_t n, double* param, const double* grad, double* m, double* v, const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double mhat = m[i] / c.bias1;
    const double vhat = v[i] / c.bias2;
    param[i] = param[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

const KernelTable kScalar{"scalar", gemm_nn, gemm_tn, gemm_nt, add, sub, mul, axpy, fma_acc, sum, adam};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace arflow::kernels
