#include "kernel_variants.hpp"

#include <algorithm>
#include <cstring>

namespace hsmgnn::kernels::scalar {

namespace {

void clear(double* c, std::size_t n) { std::fill(c, c + n, 0.0); }

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t p,
             std::size_t q, std::size_t r, bool accumulate) {
  if (!accumulate) clear(c, p * r);
  for (std::size_t i = 0; i < p; ++i) {
    double* ci = c + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = a[i * q + k];
      const double* bk = b + k * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += aik * bk[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t p,
             std::size_t q, std::size_t r, bool accumulate) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* ai = a + i * q;
    for (std::size_t j = 0; j < r; ++j) {
      const double v = dot(ai, b + j * q, q);
      c[i * r + j] = accumulate ? c[i * r + j] + v : v;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t p,
             std::size_t q, std::size_t r, bool accumulate) {
  if (!accumulate) clear(c, p * r);
  for (std::size_t k = 0; k < q; ++k) {
    const double* ak = a + k * p;
    const double* bk = b + k * r;
    for (std::size_t i = 0; i < p; ++i) {
      const double aki = ak[i];
      double* ci = c + i * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += aki * bk[j];
    }
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void relu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* gx,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) gx[i] += g[i];
  }
}

}  // namespace hsmgnn::kernels::scalar
