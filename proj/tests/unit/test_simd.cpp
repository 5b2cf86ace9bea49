#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "randinf/simd/kernels.hpp"

using namespace randinf::simd;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed, double lo = -3.0, double hi = 3.0) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

void expect_close(double a, double b, double scale) {
  EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, scale)) << "scalar=" << a << " avx2=" << b;
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (avx2_kernels() == nullptr) GTEST_SKIP() << "AVX2 unavailable";
  }
  const KernelTable& s = scalar_kernels();
  const KernelTable& v = *avx2_kernels();
};

}  // namespace

TEST_P(KernelEquivalence, Reductions) {
  const std::size_t n = GetParam();
  const auto x = random_vec(n, 1 + n), y = random_vec(n, 1000 + n);
  double abs_sum = 0.0;
  for (double e : x) abs_sum += std::fabs(e);
  const double scale = abs_sum * 27.0;

  expect_close(s.sum(x.data(), n), v.sum(x.data(), n), scale);
  expect_close(s.dot(x.data(), y.data(), n), v.dot(x.data(), y.data(), n), scale);
  expect_close(s.sum_sq_dev(x.data(), n, 0.3), v.sum_sq_dev(x.data(), n, 0.3), scale);
  expect_close(s.cross_dev(x.data(), 0.1, y.data(), -0.2, n), v.cross_dev(x.data(), 0.1, y.data(), -0.2, n), scale);
  expect_close(s.sum_abs_cubed(x.data(), n), v.sum_abs_cubed(x.data(), n), scale);
  for (int r : {1, 2, 3, 4, 7}) {
    expect_close(s.sum_pow(x.data(), n, r), v.sum_pow(x.data(), n, r), scale * std::pow(3.0, r));
  }
  EXPECT_EQ(s.sum_sq_above(x.data(), n, 1.5) == 0.0, v.sum_sq_above(x.data(), n, 1.5) == 0.0);
  expect_close(s.sum_sq_above(x.data(), n, 1.5), v.sum_sq_above(x.data(), n, 1.5), scale);
  EXPECT_EQ(s.max_abs(x.data(), n), v.max_abs(x.data(), n));

  const auto pos = random_vec(n, 7 + n, 0.0, 4.0);
  expect_close(s.sum_pow_three_halves(pos.data(), n), v.sum_pow_three_halves(pos.data(), n), scale * 8.0);
}

TEST_P(KernelEquivalence, ElementwiseOps) {
  const std::size_t n = GetParam();
  const auto x = random_vec(n, 3 + n), shift = random_vec(n, 5 + n);
  std::vector<double> a(n), b(n);
  s.center(x.data(), shift.data(), 0.25, a.data(), n);
  v.center(x.data(), shift.data(), 0.25, b.data(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(a[i], b[i]);

  std::vector<double> ya = shift, yb = shift;
  s.axpy(1.7, x.data(), ya.data(), n);
  v.axpy(1.7, x.data(), yb.data(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ya[i], yb[i], 1e-14 * 10);

  std::vector<double> qa = shift, qb = shift;
  s.add_squares(x.data(), qa.data(), n);
  v.add_squares(x.data(), qb.data(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(qa[i], qb[i], 1e-14 * 20);
}

TEST_P(KernelEquivalence, GatherAlongPermutation) {
  const std::size_t n = GetParam();
  if (n == 0) return;
  const auto m = random_vec(n * n, 11 + n);
  std::vector<std::int32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(n));
  double naive = 0.0;
  for (std::size_t i = 0; i < n; ++i) naive += m[i + static_cast<std::size_t>(perm[i]) * n];
  expect_close(naive, s.gather_sum(m.data(), n, perm.data(), n), 3.0 * n);
  expect_close(naive, v.gather_sum(m.data(), n, perm.data(), n), 3.0 * n);
}

INSTANTIATE_TEST_SUITE_P(Sizes, KernelEquivalence, ::testing::Values(0, 1, 3, 4, 5, 7, 8, 9, 15, 16, 17, 33, 257, 4099));

TEST(KernelDispatch, SelectSwitchesActiveTable) {
  const Backend initial = active().backend;
  select(Backend::scalar);
  EXPECT_EQ(active().backend, Backend::scalar);
  if (avx2_kernels() != nullptr) {
    select(Backend::avx2);
    EXPECT_EQ(active().backend, Backend::avx2);
  } else {
    EXPECT_THROW(select(Backend::avx2), std::invalid_argument);
  }
  select(initial);
}

TEST(KernelDispatch, SpanWrappersCheckSizes) {
  std::vector<double> a(4, 1.0), b(3, 1.0);
  EXPECT_THROW(dot(a, b), std::invalid_argument);
  EXPECT_THROW(sum_pow(a, 0), std::invalid_argument);
  EXPECT_THROW(sum_pow(a, 17), std::invalid_argument);
  EXPECT_DOUBLE_EQ(dot(a, a), 4.0);
  EXPECT_DOUBLE_EQ(mean(a), 1.0);
}

TEST(KernelDispatch, Names) {
  EXPECT_EQ(name(Backend::scalar), "scalar");
  EXPECT_EQ(name(Backend::avx2), "avx2");
}
