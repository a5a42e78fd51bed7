#include <atomic>
#include <cstdlib>
#include <string_view>

#include "hsmgnn/kernels.hpp"
#include "kernel_variants.hpp"

namespace hsmgnn::kernels {

namespace {

const KernelTable kScalar{
    "scalar",      scalar::gemm_nn, scalar::gemm_nt, scalar::gemm_tn,
    scalar::dot,   scalar::axpy,    scalar::add,     scalar::mul,
    scalar::scale, scalar::relu,    scalar::relu_backward,
};

#if defined(HSMGNN_HAVE_AVX2)
const KernelTable kAvx2{
    "avx2",      avx2::gemm_nn, avx2::gemm_nt, avx2::gemm_tn,
    avx2::dot,   avx2::axpy,    avx2::add,     avx2::mul,
    avx2::scale, avx2::relu,    avx2::relu_backward,
};
#endif

const KernelTable* detect() {
  if (const char* env = std::getenv("HSMGNN_KERNELS")) {
    if (std::string_view(env) == "scalar") return &kScalar;
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(HSMGNN_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void set_active(const KernelTable& table) {
  slot().store(&table, std::memory_order_relaxed);
}

}  // namespace hsmgnn::kernels
