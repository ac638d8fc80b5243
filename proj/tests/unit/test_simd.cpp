#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "goal/simd.hpp"

using namespace goal::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar gemm matches the textbook triple loop") {
  std::mt19937_64 rng(1);
  const std::size_t m = 5, k = 7, n = 3;
  auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
  std::vector<double> c(m * n, 0.0);
  scalar::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("avx2 kernels agree with the scalar reference on ragged shapes") {
  if (!cpu_supports(Isa::avx2)) {
    MESSAGE("AVX2 unavailable; skipping equivalence sweep");
    return;
  }
  std::mt19937_64 rng(2);
  const std::size_t dims[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 33, 64, 65};
  for (std::size_t m : dims)
    for (std::size_t k : {std::size_t{1}, std::size_t{8}, std::size_t{13}, std::size_t{64}})
      for (std::size_t n : dims) {
        auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
        auto c0 = random_vec(rng, m * n);
        auto c1 = c0;
        scalar::gemm_nn(a.data(), b.data(), c0.data(), m, k, n);
        avx2::gemm_nn(a.data(), b.data(), c1.data(), m, k, n);
        double worst = 0.0;
        for (std::size_t i = 0; i < c0.size(); ++i) worst = std::max(worst, std::abs(c0[i] - c1[i]));
        CHECK_MESSAGE(worst <= 1e-12 * static_cast<double>(k + 1), "m=", m, " k=", k, " n=", n);
      }
  for (std::size_t n : {0, 1, 3, 4, 7, 8, 9, 31, 64, 100}) {
    auto x = random_vec(rng, n), y0 = random_vec(rng, n);
    auto y1 = y0;
    scalar::axpy(0.37, x.data(), y0.data(), n);
    avx2::axpy(0.37, x.data(), y1.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y0[i] - y1[i]) <= 1e-15);
    CHECK(std::abs(scalar::dot(x.data(), y0.data(), n) - avx2::dot(x.data(), y0.data(), n)) <=
          1e-12);
  }
}

TEST_CASE("transposed gemm variants match explicit transposes") {
  std::mt19937_64 rng(3);
  const std::size_t m = 6, k = 5, n = 9;
  auto a = random_vec(rng, m * k), bt = random_vec(rng, n * k), at = random_vec(rng, k * m);
  auto b = random_vec(rng, k * n);
  std::vector<double> c_nt(m * n, 0.0), c_tn(m * n, 0.0);
  gemm_nt(a.data(), bt.data(), c_nt.data(), m, k, n);
  gemm_tn(at.data(), b.data(), c_tn.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s_nt = 0.0, s_tn = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        s_nt += a[i * k + p] * bt[j * k + p];
        s_tn += at[p * m + i] * b[p * n + j];
      }
      CHECK(c_nt[i * n + j] == doctest::Approx(s_nt).epsilon(1e-13));
      CHECK(c_tn[i * n + j] == doctest::Approx(s_tn).epsilon(1e-13));
    }
}

TEST_CASE("dispatch can be forced to the scalar path and restored") {
  const Isa before = active().isa;
  set_active(Isa::scalar);
  CHECK(active().isa == Isa::scalar);
  set_active(before);
  CHECK(active().isa == before);
}
