#pragma once

// Internal declarations of the per-ISA kernel implementations.

#include <cstddef>

#define HSMGNN_DECLARE_KERNELS                                                 \
  void gemm_nn(const double* a, const double* b, double* c, std::size_t p,     \
               std::size_t q, std::size_t r, bool accumulate);                 \
  void gemm_nt(const double* a, const double* b, double* c, std::size_t p,     \
               std::size_t q, std::size_t r, bool accumulate);                 \
  void gemm_tn(const double* a, const double* b, double* c, std::size_t p,     \
               std::size_t q, std::size_t r, bool accumulate);                 \
  double dot(const double* x, const double* y, std::size_t n);                 \
  void axpy(double alpha, const double* x, double* y, std::size_t n);          \
  void add(const double* x, const double* y, double* out, std::size_t n);      \
  void mul(const double* x, const double* y, double* out, std::size_t n);      \
  void scale(double alpha, const double* x, double* out, std::size_t n);       \
  void relu(const double* x, double* out, std::size_t n);                      \
  void relu_backward(const double* x, const double* g, double* gx,             \
                     std::size_t n);

namespace hsmgnn::kernels::scalar {
HSMGNN_DECLARE_KERNELS
}

namespace hsmgnn::kernels::avx2 {
HSMGNN_DECLARE_KERNELS
}

#undef HSMGNN_DECLARE_KERNELS
