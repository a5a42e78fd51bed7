// Compiled with -mavx2 -mfma; only reached through the dispatch table after
// a CPUID check.

#include <immintrin.h>

#include <algorithm>

#include "kernel_variants.hpp"

namespace hsmgnn::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// c_row[0..r) (+)= sum_k a(k) * b_row(k)[0..r), where a(k) = a[k * a_stride]
// and b_row(k) = b + k * r.
inline void row_times_matrix(const double* a, std::size_t a_stride,
                             const double* b, double* c_row, std::size_t q,
                             std::size_t r, bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= r; j += 16) {
    __m256d c0 = accumulate ? _mm256_loadu_pd(c_row + j) : _mm256_setzero_pd();
    __m256d c1 = accumulate ? _mm256_loadu_pd(c_row + j + 4) : _mm256_setzero_pd();
    __m256d c2 = accumulate ? _mm256_loadu_pd(c_row + j + 8) : _mm256_setzero_pd();
    __m256d c3 = accumulate ? _mm256_loadu_pd(c_row + j + 12) : _mm256_setzero_pd();
    for (std::size_t k = 0; k < q; ++k) {
      const __m256d av = _mm256_set1_pd(a[k * a_stride]);
      const double* bk = b + k * r + j;
      c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk), c0);
      c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + 4), c1);
      c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + 8), c2);
      c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + 12), c3);
    }
    _mm256_storeu_pd(c_row + j, c0);
    _mm256_storeu_pd(c_row + j + 4, c1);
    _mm256_storeu_pd(c_row + j + 8, c2);
    _mm256_storeu_pd(c_row + j + 12, c3);
  }
  for (; j + 4 <= r; j += 4) {
    __m256d c0 = accumulate ? _mm256_loadu_pd(c_row + j) : _mm256_setzero_pd();
    for (std::size_t k = 0; k < q; ++k) {
      c0 = _mm256_fmadd_pd(_mm256_set1_pd(a[k * a_stride]),
                           _mm256_loadu_pd(b + k * r + j), c0);
    }
    _mm256_storeu_pd(c_row + j, c0);
  }
  for (; j < r; ++j) {
    double acc = accumulate ? c_row[j] : 0.0;
    for (std::size_t k = 0; k < q; ++k) acc += a[k * a_stride] * b[k * r + j];
    c_row[j] = acc;
  }
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t p,
             std::size_t q, std::size_t r, bool accumulate) {
  for (std::size_t i = 0; i < p; ++i) {
    row_times_matrix(a + i * q, 1, b, c + i * r, q, r, accumulate);
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
  for (std::size_t i = 0; i < p; ++i) {
    row_times_matrix(a + i, p, b, c + i * r, q, r, accumulate);
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4),
                         s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  }
  double acc = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void relu(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    // Strict x > 0 keeps -0.0 and NaN handling identical to the scalar path.
    const __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(v, mask));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* g, double* gx,
                   std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gv = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), gv));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) gx[i] += g[i];
  }
}

}  // namespace hsmgnn::kernels::avx2
