#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "randinf/distributions.hpp"
#include "randinf/errors.hpp"
#include "randinf/rng.hpp"

using namespace randinf;

TEST(Rng, SameSeedSameSequence) {
  Rng a({42, 3}), b({42, 3});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.engine()(), b.engine()());
}

TEST(Rng, StreamsDiffer) {
  Rng a({42, 0}), b({42, 1});
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.engine()() == b.engine()();
  EXPECT_EQ(same, 0);
}

TEST(Rng, ReplicateStreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const RngSeed s = replicate_stream(7, i);
    seen.insert(s.seed ^ (s.stream * 0x9e3779b97f4a7c15ULL));
  }
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Rng, UniformIndexInRange) {
  Rng r({1, 0});
  for (int i = 0; i < 10000; ++i) ASSERT_LT(r.uniform_index(7), 7u);
  EXPECT_EQ(r.uniform_index(1), 0u);
}

TEST(Rng, ShuffleKeepsMultiset) {
  Rng r({5, 0});
  std::vector<int> v{1, 1, 2, 2, 2, 3};
  r.shuffle(std::span<int>(v));
  std::multiset<int> m(v.begin(), v.end());
  EXPECT_EQ(m, (std::multiset<int>{1, 1, 2, 2, 2, 3}));
}

TEST(Distributions, NormalQuantiles) {
  EXPECT_NEAR(dist::normal_two_sided_critical(0.05), 1.959963984540054, 1e-12);
  EXPECT_NEAR(dist::normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(dist::normal_cdf(0.0), 0.5, 1e-15);
  EXPECT_THROW(dist::normal_quantile(1.0), InvalidInput);
  EXPECT_THROW(dist::normal_two_sided_critical(0.0), InvalidInput);
}

TEST(Distributions, ChiSquared) {
  EXPECT_NEAR(dist::chi_squared_quantile(1, 0.95), 3.841458820694124, 1e-10);
  EXPECT_NEAR(dist::chi_squared_quantile(2, 0.95), 5.991464547107979, 1e-10);
  // K = 2: closed form 1 - exp(-x/2).
  for (double x : {0.1, 1.0, 4.0, 9.0}) EXPECT_NEAR(dist::chi_squared_cdf(2, x), 1.0 - std::exp(-x / 2.0), 1e-14);
  EXPECT_EQ(dist::chi_squared_cdf(3, 0.0), 0.0);
  EXPECT_EQ(dist::chi_squared_cdf(3, INFINITY), 1.0);
  for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) {
    EXPECT_NEAR(dist::chi_squared_cdf(4, dist::chi_squared_quantile(4, p)), p, 1e-12);
  }
}

TEST(Distributions, LowerEmpiricalQuantile) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_EQ(dist::lower_empirical_quantile(v, 0.2), 1);
  EXPECT_EQ(dist::lower_empirical_quantile(v, 0.21), 2);
  EXPECT_EQ(dist::lower_empirical_quantile(v, 0.5), 3);
  EXPECT_EQ(dist::lower_empirical_quantile(v, 1.0), 5);
  EXPECT_THROW(dist::lower_empirical_quantile({}, 0.5), InvalidInput);
}

TEST(Distributions, KolmogorovDistances) {
  const std::vector<double> one{0.0};
  EXPECT_NEAR(dist::kolmogorov_to_normal(one), 0.5, 1e-15);
  const std::vector<double> a{1, 2, 3}, b{1, 2, 3}, c{10, 11};
  EXPECT_EQ(dist::kolmogorov_two_sample(a, b), 0.0);
  EXPECT_EQ(dist::kolmogorov_two_sample(a, c), 1.0);
  const std::vector<double> d{1, 3}, e{2, 4};
  EXPECT_NEAR(dist::kolmogorov_two_sample(d, e), 0.5, 1e-15);

  Rng r({9, 0});
  std::vector<double> z(20000);
  for (auto& x : z) x = r.normal();
  EXPECT_LT(dist::kolmogorov_to_normal(z), 1.63 / std::sqrt(20000.0));
}
