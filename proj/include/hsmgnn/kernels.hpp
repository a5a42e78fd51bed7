#pragma once

#include <cstddef>
#include <string_view>

// Dense f64 inner-loop kernels. Every routine exists as a portable scalar
// reference and, on x86-64, an AVX2+FMA variant. The active table is chosen
// once at startup from CPUID and can be pinned with HSMGNN_KERNELS=scalar.
//
// All matrices are row-major and densely packed.

namespace hsmgnn::kernels {

struct KernelTable {
  std::string_view name;

  // c[p x r] (+)= a[p x q] * b[q x r]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t p,
                  std::size_t q, std::size_t r, bool accumulate);
  // c[p x r] (+)= a[p x q] * b[r x q]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t p,
                  std::size_t q, std::size_t r, bool accumulate);
  // c[p x r] (+)= a[q x p]^T * b[q x r]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t p,
                  std::size_t q, std::size_t r, bool accumulate);

  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = x + y, out = x * y, out = alpha * x (out may alias x)
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  // out = max(x, 0)
  void (*relu)(const double* x, double* out, std::size_t n);
  // gx += (x > 0) ? g : 0
  void (*relu_backward)(const double* x, const double* g, double* gx,
                        std::size_t n);
};

const KernelTable& scalar_table();

/// AVX2+FMA table, or nullptr when not compiled in or not supported by the CPU.
const KernelTable* avx2_table();

/// Table used by tensor operations.
const KernelTable& active();

/// Overrides the active table (tests and benchmarks). Not thread-safe with
/// respect to concurrently running tensor operations.
void set_active(const KernelTable& table);

}  // namespace hsmgnn::kernels
