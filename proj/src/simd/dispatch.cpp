#include <atomic>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "goal/simd.hpp"

namespace goal::simd {

namespace {

const Kernels kScalar{Isa::scalar, &scalar::gemm_nn, &scalar::axpy, &scalar::dot};
const Kernels kAvx2{Isa::avx2, &avx2::gemm_nn, &avx2::axpy, &avx2::dot};

Isa detect() {
  // GOAL_SIMD=scalar forces the reference path.
  if (const char* env = std::getenv("GOAL_SIMD"); env && std::strcmp(env, "scalar") == 0)
    return Isa::scalar;
  return cpu_supports(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<const Kernels*>& slot() {
  static std::atomic<const Kernels*> current{&kernels_for(detect())};
  return current;
}

}  // namespace

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels_for(Isa isa) {
  return isa == Isa::avx2 ? kAvx2 : kScalar;
}

const Kernels& active() { return *slot().load(std::memory_order_relaxed); }

Isa set_active(Isa isa) {
  const Isa previous = active().isa;
  if (cpu_supports(isa)) slot().store(&kernels_for(isa));
  return previous;
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  active().gemm_nn(a, b, c, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  active().gemm_nn(a, bt.data(), c, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  std::vector<double> at(m * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
  active().gemm_nn(at.data(), b, c, m, k, n);
}

}  // namespace goal::simd
