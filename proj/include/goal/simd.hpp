#pragma once

// Dense f64 GEMM kernels. Each kernel family has a portable scalar
// reference and an AVX2+FMA variant; the active one is picked once at
// startup from CPUID and can be overridden for equivalence testing.

#include <cstddef>
#include <string_view>

namespace goal::simd {

enum class Isa { scalar, avx2 };

/// C[m×n] += A[m×k] · B[k×n]; all row-major and densely packed.
using GemmFn = void (*)(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
/// y[0..n) += alpha · x[0..n)
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
using DotFn = double (*)(const double* x, const double* y, std::size_t n);

struct Kernels {
  Isa isa;
  GemmFn gemm_nn;
  AxpyFn axpy;
  DotFn dot;
};

namespace scalar {
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
}  // namespace avx2

bool cpu_supports(Isa isa);
const Kernels& kernels_for(Isa isa);

/// Kernels used by the tensor library.
const Kernels& active();
/// Selects `isa` if the CPU supports it; returns the previous choice.
Isa set_active(Isa isa);

std::string_view isa_name(Isa isa);

// Convenience wrappers over the active table.

/// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);
/// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);
/// C[m×n] += A[k×m]ᵀ · B[k×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n);

}  // namespace goal::simd
