// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "goal/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define GOAL_HAVE_AVX2_TU 1
#endif

namespace goal::simd::avx2 {

#if GOAL_HAVE_AVX2_TU

namespace {

// 4×8 register tile: 8 accumulators, two B loads and four broadcasts per k.
inline void tile_4x8(const double* a, const double* b, double* c,
                     std::size_t k, std::size_t n, std::size_t lda) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  auto store = [](double* dst, __m256d lo, __m256d hi) {
    _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), lo));
    _mm256_storeu_pd(dst + 4, _mm256_add_pd(_mm256_loadu_pd(dst + 4), hi));
  };
  store(c, c00, c01);
  store(c + n, c10, c11);
  store(c + 2 * n, c20, c21);
  store(c + 3 * n, c30, c31);
}

inline void row_1x4(const double* a, const double* b, double* c, std::size_t k,
                    std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p)
    acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * n),
                          acc);
  _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), acc));
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  const std::size_t n8 = n - n % 8;
  const std::size_t n4 = n - n % 4;
  const std::size_t m4 = m - m % 4;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8)
      tile_4x8(a + i * k, b + j, c + i * n + j, k, n, k);
    for (std::size_t r = i; r < i + 4; ++r) {
      for (std::size_t j = n8; j < n4; j += 4)
        row_1x4(a + r * k, b + j, c + r * n + j, k, n);
      for (std::size_t j = n4; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[r * k + p] * b[p * n + j];
        c[r * n + j] += s;
      }
    }
  }
  for (std::size_t r = m4; r < m; ++r) {
    for (std::size_t j = 0; j < n4; j += 4)
      row_1x4(a + r * k, b + j, c + r * n + j, k, n);
    for (std::size_t j = n4; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[r * k + p] * b[p * n + j];
      c[r * n + j] += s;
    }
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

#else

void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  scalar::gemm_nn(a, b, c, m, k, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  scalar::axpy(alpha, x, y, n);
}
double dot(const double* x, const double* y, std::size_t n) {
  return scalar::dot(x, y, n);
}

#endif

}  // namespace goal::simd::avx2
