#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "randinf/designs.hpp"
#include "randinf/distributions.hpp"

using namespace randinf;

namespace {

double gof_critical(int cells, double alpha) { return dist::chi_squared_quantile(cells - 1, 1.0 - alpha); }

}  // namespace

TEST(DrawCre, RejectsZeroCount) {
  const std::vector<int> counts{4, 0};
  EXPECT_THROW(draw_cre(counts, RngSeed{1, 0}), InvalidInput);
  EXPECT_THROW(draw_cre(std::vector<int>{4}, RngSeed{1, 0}), InvalidInput);
}

TEST(DrawCre, ExactArmCounts) {
  const std::vector<int> counts{3, 5, 2};
  Rng rng({11, 0});
  for (int r = 0; r < 200; ++r) {
    const Assignment a = draw_cre(counts, rng);
    EXPECT_EQ(a.counts(), counts);
  }
}

TEST(DrawCre, Deterministic) {
  const std::vector<int> counts{3, 3};
  EXPECT_EQ(draw_cre(counts, RngSeed{7, 2}), draw_cre(counts, RngSeed{7, 2}));
}

TEST(DrawCre, UniformOverSixAssignments) {
  const std::vector<int> counts{2, 2};
  Rng rng({2024, 0});
  std::map<std::vector<int>, int> freq;
  const int draws = 60000;
  for (int r = 0; r < draws; ++r) ++freq[draw_cre(counts, rng).arms()];
  EXPECT_EQ(freq.size(), 6u);
  EXPECT_LT(oracle::chi_square_stat(freq, 6, draws), gof_critical(6, 0.01));
}

TEST(DrawCre, UniformOverMultiArmSupport) {
  const std::vector<int> counts{2, 1, 2};
  Rng rng({99, 1});
  std::map<std::vector<int>, int> freq;
  const int draws = 100000;
  for (int r = 0; r < draws; ++r) ++freq[draw_cre(counts, rng).arms()];
  EXPECT_EQ(freq.size(), 30u);
  EXPECT_LT(oracle::chi_square_stat(freq, 30, draws), gof_critical(30, 0.001));
}

TEST(EnumerateCre, SupportSizes) {
  EXPECT_EQ(enumerate_cre(std::vector<int>{1, 1}).size(), 2u);
  EXPECT_EQ(enumerate_cre(std::vector<int>{2, 2}).size(), 6u);
  EXPECT_EQ(enumerate_cre(std::vector<int>{2, 1, 1}).size(), 12u);
}

TEST(EnumerateCre, DistinctAndLexicographic) {
  const auto all = enumerate_cre(std::vector<int>{2, 2, 1});
  std::set<std::vector<int>> seen;
  for (std::size_t i = 0; i < all.size(); ++i) {
    seen.insert(all[i].arms());
    if (i > 0) EXPECT_LT(all[i - 1].arms(), all[i].arms());
  }
  EXPECT_EQ(seen.size(), all.size());
  EXPECT_EQ(all.size(), 30u);
}

TEST(EnumerateCre, SupportCap) {
  EXPECT_THROW(enumerate_cre(std::vector<int>{15, 15}), Infeasible);
  EXPECT_DOUBLE_EQ(cre_support_size(std::vector<int>{15, 15}), 155117520.0);
}

TEST(Mahalanobis, HandExample) {
  MatrixXd x(4, 1);
  x << 1, -1, 1, -1;
  const Assignment a({2, 1, 2, 1}, 2);
  EXPECT_NEAR(mahalanobis(CovariateMatrix(x), a), 3.0, 1e-12);
}

TEST(Mahalanobis, PerfectBalanceIsZero) {
  MatrixXd x(4, 1);
  x << 1, 2, 2, 1;
  EXPECT_NEAR(mahalanobis(CovariateMatrix(x), Assignment({2, 2, 1, 1}, 2)), 0.0, 1e-14);
}

TEST(Mahalanobis, ConstantCovariateIsSingular) {
  MatrixXd x(4, 2);
  x << 1, 3, 2, 3, 3, 3, 4, 3;
  EXPECT_THROW(mahalanobis(CovariateMatrix(x), Assignment({2, 2, 1, 1}, 2)), Infeasible);
}

TEST(Mahalanobis, MatchesDirectFormula) {
  std::mt19937_64 g(5);
  std::normal_distribution<double> nd;
  MatrixXd x(10, 3);
  for (int i = 0; i < 10; ++i)
    for (int k = 0; k < 3; ++k) x(i, k) = nd(g);
  const Assignment a = draw_cre(std::vector<int>{6, 4}, RngSeed{3, 0});
  VectorXd m1 = VectorXd::Zero(3), m0 = VectorXd::Zero(3);
  for (int i = 0; i < 10; ++i) (a.arm(i) == 2 ? m1 : m0) += x.row(i).transpose();
  m1 /= 4.0;
  m0 /= 6.0;
  const VectorXd d = m1 - m0;
  const MatrixXd xc = x.rowwise() - x.colwise().mean();
  const MatrixXd s = xc.transpose() * xc / 9.0;
  const double direct = 4.0 * 6.0 / 10.0 * d.dot(s.inverse() * d);
  EXPECT_NEAR(mahalanobis(CovariateMatrix(x), a), direct, 1e-12 * direct);
}

TEST(Mahalanobis, AffineInvariance) {
  std::mt19937_64 g(8);
  std::normal_distribution<double> nd;
  MatrixXd x(20, 3), b(3, 3);
  for (int i = 0; i < 20; ++i)
    for (int k = 0; k < 3; ++k) x(i, k) = nd(g);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) b(i, k) = nd(g);
  b += 3.0 * MatrixXd::Identity(3, 3);
  MatrixXd y = x * b;
  y.rowwise() += Eigen::RowVector3d(4.0, -2.0, 7.5);
  const BalanceCriterion cx{CovariateMatrix(x)}, cy{CovariateMatrix(y)};
  Rng rng({1, 0});
  for (int r = 0; r < 50; ++r) {
    const Assignment a = draw_cre(std::vector<int>{10, 10}, rng);
    EXPECT_TRUE(oracle::near_rel(cx(a), cy(a), 1e-8));
  }
}

TEST(ThresholdFromAcceptance, KnownQuantiles) {
  EXPECT_NEAR(threshold_from_acceptance(1, 0.95), 3.841458820694124, 1e-10 * 3.84);
  EXPECT_NEAR(threshold_from_acceptance(2, 0.95), 5.991464547107979, 1e-10 * 5.99);
  double prev = 0.0;
  for (double p : {0.1, 0.5, 0.9, 0.99, 0.999999}) {
    const double a = threshold_from_acceptance(1, p);
    EXPECT_GT(a, prev);
    prev = a;
  }
  EXPECT_THROW(threshold_from_acceptance(1, 1.0), InvalidInput);
  EXPECT_THROW(threshold_from_acceptance(0, 0.5), InvalidInput);
}

TEST(DrawRem, InfiniteThresholdAcceptsFirstDraw) {
  MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 7;
  const RemSpec spec{3, 3, std::numeric_limits<double>::infinity(), 10};
  const RemDraw r = draw_rem(CovariateMatrix(x), spec, RngSeed{4, 0});
  EXPECT_EQ(r.draws_used, 1u);
  EXPECT_EQ(r.assignment, draw_cre(std::vector<int>{3, 3}, RngSeed{4, 0}));
}

TEST(DrawRem, ExhaustionCarriesBestDistance) {
  MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 7;
  const CovariateMatrix cx(x);
  double min_m = INFINITY;
  for (const auto& a : enumerate_cre(std::vector<int>{3, 3})) min_m = std::min(min_m, mahalanobis(cx, a));
  ASSERT_GT(min_m, 0.0);
  const RemSpec spec{3, 3, min_m / 2.0, 500};
  try {
    draw_rem(cx, spec, RngSeed{4, 0});
    FAIL() << "expected exhaustion";
  } catch (const RemExhausted& e) {
    EXPECT_EQ(e.draws(), 500u);
    EXPECT_GE(e.best_distance(), min_m - 1e-12);
  }
}

TEST(DrawRem, AcceptedDrawsSatisfyThreshold) {
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd;
  MatrixXd x(40, 2);
  for (int i = 0; i < 40; ++i)
    for (int k = 0; k < 2; ++k) x(i, k) = nd(g);
  const CovariateMatrix cx(x);
  const BalanceCriterion crit(cx);
  const RemSpec spec{20, 20, threshold_from_acceptance(2, 0.2)};
  Rng rng({10, 0});
  for (int r = 0; r < 100; ++r) {
    const RemDraw d = draw_rem(crit, spec, rng);
    EXPECT_LE(crit(d.assignment), spec.threshold);
    EXPECT_NEAR(d.distance, crit(d.assignment), 1e-12);
    EXPECT_EQ(d.assignment.count(2), 20);
  }
}

TEST(DrawRem, AcceptanceRateNearAsymptoticProbability) {
  std::mt19937_64 g(12);
  std::normal_distribution<double> nd;
  MatrixXd x(400, 2);
  for (int i = 0; i < 400; ++i)
    for (int k = 0; k < 2; ++k) x(i, k) = nd(g);
  const BalanceCriterion crit{CovariateMatrix(x)};
  const RemSpec spec{200, 200, threshold_from_acceptance(2, 0.5)};
  Rng rng({77, 0});
  std::size_t total = 0;
  const int accepted = 2000;
  for (int r = 0; r < accepted; ++r) total += draw_rem(crit, spec, rng).draws_used;
  const double rate = static_cast<double>(accepted) / static_cast<double>(total);
  const double se = std::sqrt(0.5 * 0.5 / static_cast<double>(total));
  EXPECT_NEAR(rate, 0.5, 3.0 * se);
}

TEST(DrawRem, LawIsConditionedUniform) {
  std::mt19937_64 g(21);
  std::normal_distribution<double> nd;
  MatrixXd x(8, 1);
  for (int i = 0; i < 8; ++i) x(i, 0) = nd(g);
  const CovariateMatrix cx(x);
  const BalanceCriterion crit(cx);
  std::vector<double> all_m;
  const auto support = enumerate_cre(std::vector<int>{4, 4});
  for (const auto& a : support) all_m.push_back(crit(a));
  std::vector<double> sorted = all_m;
  std::sort(sorted.begin(), sorted.end());
  const double threshold = sorted[sorted.size() / 2];
  std::map<std::vector<int>, double> target;
  int admissible = 0;
  for (std::size_t i = 0; i < support.size(); ++i) admissible += all_m[i] <= threshold;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (all_m[i] <= threshold) target[support[i].arms()] = 1.0 / admissible;
  }
  const RemSpec spec{4, 4, threshold};
  Rng rng({5, 5});
  std::map<std::vector<int>, int> freq;
  const int draws = 100000;
  for (int r = 0; r < draws; ++r) ++freq[draw_rem(crit, spec, rng).assignment.arms()];
  double tv = 0.0;
  for (const auto& [z, p] : target) {
    const auto it = freq.find(z);
    tv += std::fabs(p - (it == freq.end() ? 0.0 : static_cast<double>(it->second) / draws));
  }
  for (const auto& [z, c] : freq) EXPECT_TRUE(target.count(z)) << "draw outside {M <= a}";
  EXPECT_LT(tv / 2.0, 0.02);
}

TEST(DrawSre, PerStratumCountsAndLabels) {
  const SreSpec spec{{{4, 2}, {5, 1}, {3, 2}}};
  const Assignment a = draw_sre(spec, RngSeed{1, 0});
  EXPECT_EQ(a.structure(), Structure::stratum);
  EXPECT_EQ(a.labels(), (std::vector<int>{1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3}));
  int t[3] = {0, 0, 0};
  for (int i = 0; i < a.units(); ++i) t[a.labels()[i] - 1] += a.arm(i) == kTreatedArm;
  EXPECT_EQ(t[0], 2);
  EXPECT_EQ(t[1], 1);
  EXPECT_EQ(t[2], 2);
}

TEST(DrawSre, InvalidStratumRejected) {
  EXPECT_THROW(draw_sre(SreSpec{{{4, 0}}}, RngSeed{}), InvalidInput);
  EXPECT_THROW(draw_sre(SreSpec{{{4, 4}}}, RngSeed{}), InvalidInput);
  EXPECT_THROW(draw_sre(SreSpec{}, RngSeed{}), InvalidInput);
}

TEST(DrawSre, UniformOver36Assignments) {
  const SreSpec spec{{{4, 2}, {4, 2}}};
  Rng rng({31, 0});
  std::map<std::vector<int>, int> freq;
  const int draws = 100000;
  for (int r = 0; r < draws; ++r) ++freq[draw_sre(spec, rng).arms()];
  EXPECT_EQ(freq.size(), 36u);
  EXPECT_LT(oracle::chi_square_stat(freq, 36, draws), gof_critical(36, 0.001));
}

TEST(DrawSre, SingleStratumMatchesCreLaw) {
  const SreSpec spec{{{5, 2}}};
  const Assignment a = draw_sre(spec, RngSeed{9, 0});
  EXPECT_EQ(a.arms(), draw_cre(std::vector<int>{3, 2}, RngSeed{9, 0}).arms());
}

TEST(DrawMpe, OneTreatedPerPair) {
  const Assignment a = draw_mpe(25, RngSeed{3, 0});
  EXPECT_EQ(a.structure(), Structure::pair);
  for (int k = 0; k < 25; ++k) {
    EXPECT_EQ(a.labels()[2 * k], k + 1);
    EXPECT_EQ(a.labels()[2 * k + 1], k + 1);
    EXPECT_EQ((a.arm(2 * k) == 2) + (a.arm(2 * k + 1) == 2), 1);
  }
  EXPECT_THROW(draw_mpe(0, RngSeed{}), InvalidInput);
}

TEST(DrawMpe, UniformOverPowerOfTwo) {
  for (int n : {1, 3}) {
    Rng rng({17, static_cast<std::uint64_t>(n)});
    std::map<std::vector<int>, int> freq;
    const int draws = 40000;
    for (int r = 0; r < draws; ++r) ++freq[draw_mpe(n, rng).arms()];
    const int cells = 1 << n;
    EXPECT_EQ(freq.size(), static_cast<std::size_t>(cells));
    EXPECT_LT(oracle::chi_square_stat(freq, cells, draws), gof_critical(cells, 0.001));
  }
}

TEST(DrawCluster, ConstantWithinCluster) {
  const std::vector<int> sizes{3, 1, 4, 2, 2};
  const Assignment a = draw_cluster(5, 2, sizes, RngSeed{6, 0});
  EXPECT_EQ(a.structure(), Structure::cluster);
  std::map<int, std::set<int>> arms_in;
  for (int i = 0; i < a.units(); ++i) arms_in[a.labels()[i]].insert(a.arm(i));
  int treated = 0;
  for (const auto& [c, s] : arms_in) {
    EXPECT_EQ(s.size(), 1u);
    treated += *s.begin() == 2;
  }
  EXPECT_EQ(treated, 2);
}

TEST(DrawCluster, SixClusterAssignments) {
  const std::vector<int> sizes{2, 1, 3, 1};
  Rng rng({8, 0});
  std::map<std::vector<int>, int> freq;
  const int draws = 30000;
  for (int r = 0; r < draws; ++r) ++freq[draw_cluster(4, 2, sizes, rng).arms()];
  EXPECT_EQ(freq.size(), 6u);
  EXPECT_LT(oracle::chi_square_stat(freq, 6, draws), gof_critical(6, 0.001));
}

TEST(DrawCluster, SingletonsMatchCre) {
  const std::vector<int> sizes(6, 1);
  EXPECT_EQ(draw_cluster(6, 2, sizes, RngSeed{4, 4}).arms(), draw_cre(std::vector<int>{4, 2}, RngSeed{4, 4}).arms());
  EXPECT_THROW(draw_cluster(4, 4, std::vector<int>(4, 1), RngSeed{}), InvalidInput);
  EXPECT_THROW(draw_cluster(4, 2, std::vector<int>(3, 1), RngSeed{}), InvalidInput);
}

TEST(DesignSpec, DispatchAndUnits) {
  MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 7;
  const CovariateMatrix cx(x);
  const std::vector<DesignSpec> specs{CreSpec{{3, 3}}, RemSpec{3, 3, 100.0}, SreSpec{{{3, 1}, {3, 2}}}, MpeSpec{3},
                                      ClusterSpec{3, 1, {2, 2, 2}}};
  Rng rng({1, 1});
  for (const auto& s : specs) {
    EXPECT_EQ(design_units(s), 6);
    EXPECT_EQ(draw(s, rng, &cx).assignment.units(), 6);
  }
  EXPECT_THROW(draw(RemSpec{3, 3, 1.0}, rng), InvalidInput);
  EXPECT_THROW(validate(RemSpec{3, 3, 0.0}), InvalidInput);
}
