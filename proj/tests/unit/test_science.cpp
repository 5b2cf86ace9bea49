#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "randinf/errors.hpp"
#include "randinf/science.hpp"

using namespace randinf;

namespace {

MatrixXd random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(g);
  return m;
}

}  // namespace

TEST(ScienceTable, RejectsBadShapes) {
  EXPECT_THROW(ScienceTable(MatrixXd::Zero(1, 2)), InvalidInput);
  EXPECT_THROW(ScienceTable(MatrixXd::Zero(3, 1)), InvalidInput);
  MatrixXd y = MatrixXd::Zero(3, 2);
  y(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(ScienceTable{y}, InvalidInput);
}

TEST(Observe, ConstantTable) {
  const ScienceTable t(MatrixXd::Constant(5, 3, 2.5));
  const Assignment a({1, 2, 3, 3, 1}, 3);
  EXPECT_TRUE(observe(t, a).y.isApproxToConstant(2.5));
}

TEST(Observe, DirectLookup) {
  MatrixXd y(2, 2);
  y << 0, 1, 2, 3;
  const ObservedData obs = observe(ScienceTable(y), Assignment({1, 2}, 2));
  EXPECT_EQ(obs.y(0), 0.0);
  EXPECT_EQ(obs.y(1), 3.0);
}

TEST(Observe, IndicatorSwitchingFormula) {
  const MatrixXd y = random_matrix(6, 2, 3);
  const std::vector<int> z{0, 1, 1, 0, 1, 0};
  std::vector<int> arms;
  for (int zi : z) arms.push_back(arm_from_indicator(zi));
  const ObservedData obs = observe(ScienceTable(y), Assignment(arms, 2));
  for (int i = 0; i < 6; ++i) EXPECT_EQ(obs.y(i), z[i] * y(i, 1) + (1 - z[i]) * y(i, 0));
  EXPECT_THROW(arm_from_indicator(2), InvalidInput);
}

TEST(Observe, DimensionMismatch) {
  const ScienceTable t(MatrixXd::Zero(3, 2));
  EXPECT_THROW(observe(t, Assignment({1, 2}, 2)), InvalidInput);
  EXPECT_THROW(observe(t, Assignment({1, 2, 3}, 3)), InvalidInput);
}

TEST(Observe, UnitPermutationCommutes) {
  const MatrixXd y = random_matrix(5, 3, 4);
  const std::vector<int> z{3, 1, 2, 2, 1};
  const std::vector<int> perm{4, 2, 0, 1, 3};
  MatrixXd yp(5, 3);
  std::vector<int> zp(5);
  for (int i = 0; i < 5; ++i) {
    yp.row(i) = y.row(perm[i]);
    zp[i] = z[perm[i]];
  }
  const auto a = observe(ScienceTable(y), Assignment(z, 3));
  const auto b = observe(ScienceTable(yp), Assignment(zp, 3));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(b.y(i), a.y(perm[i]));
}

TEST(Assignment, CountsAndStructure) {
  const Assignment a({1, 2, 2, 3}, 3);
  EXPECT_EQ(a.counts(), (std::vector<int>{1, 2, 1}));
  EXPECT_THROW(Assignment({1, 4}, 3), InvalidInput);
  EXPECT_THROW(Assignment({1, 2}, 2, Structure::pair, {1}), InvalidInput);
  EXPECT_THROW(Assignment({1, 2}, 2, Structure::none, {1, 1}), InvalidInput);
}

TEST(FpMoments, HandExample) {
  const auto t = ScienceTable::two_arm((VectorXd(2) << 0, 2).finished(), (VectorXd(2) << 1, 3).finished());
  const FpMoments m = fp_moments(t, ContrastMatrix::treatment_control());
  EXPECT_DOUBLE_EQ(m.means(0), 1.0);
  EXPECT_DOUBLE_EQ(m.means(1), 2.0);
  EXPECT_DOUBLE_EQ(m.covariance(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.covariance(1, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.covariance(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(m.effects(0), 1.0);
  EXPECT_NEAR(m.effect_covariance(0, 0), 0.0, 1e-15);
}

TEST(FpMoments, ConstantColumnHasZeroVariance) {
  MatrixXd y = random_matrix(7, 3, 5);
  y.col(1).setConstant(4.0);
  MatrixXd f(3, 2);
  f << -1, 0, 1, -1, 0, 1;
  const FpMoments m = fp_moments(ScienceTable(y), ContrastMatrix(f));
  EXPECT_NEAR(m.covariance(1, 1), 0.0, 1e-14);
}

TEST(FpMoments, TreatmentControlIsAte) {
  const MatrixXd y = random_matrix(9, 2, 6);
  const FpMoments m = fp_moments(ScienceTable(y), ContrastMatrix::treatment_control());
  double ate = 0.0, s2tau = 0.0;
  std::vector<double> tau(9);
  for (int i = 0; i < 9; ++i) tau[i] = y(i, 1) - y(i, 0);
  ate = oracle::mean(tau);
  s2tau = oracle::var(tau);
  EXPECT_NEAR(m.effects(0), ate, 1e-12);
  EXPECT_NEAR(m.effect_covariance(0, 0), s2tau, 1e-12);
}

TEST(FpMoments, MatchesTwoPassDefinitionAndIsPsd) {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const int n = 3 + static_cast<int>(seed % 17), q = 2 + static_cast<int>(seed % 4);
    const MatrixXd y = random_matrix(n, q, 100 + seed);
    MatrixXd f = MatrixXd::Zero(q, q - 1);
    for (int h = 0; h < q - 1; ++h) {
      f(0, h) = -1;
      f(h + 1, h) = 1;
    }
    const FpMoments m = fp_moments(ScienceTable(y), ContrastMatrix(f));
    for (int a = 0; a < q; ++a) {
      for (int b = 0; b < q; ++b) {
        double ma = y.col(a).mean(), mb = y.col(b).mean(), s = 0.0;
        for (int i = 0; i < n; ++i) s += (y(i, a) - ma) * (y(i, b) - mb);
        EXPECT_TRUE(oracle::near_rel(m.covariance(a, b), s / (n - 1), 1e-12));
      }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.effect_covariance);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()));
  }
}

TEST(ContrastMatrix, Validation) {
  MatrixXd bad_sum(2, 1);
  bad_sum << 1, 1;
  EXPECT_THROW(ContrastMatrix{bad_sum}, InvalidInput);
  MatrixXd rank_deficient(3, 2);
  rank_deficient << -1, -2, 0, 0, 1, 2;
  EXPECT_THROW(ContrastMatrix{rank_deficient}, InvalidInput);
}

TEST(FactorialContrasts, SingleFactorIsTreatmentControl) {
  const ContrastMatrix f = factorial_contrasts(1, FactorialEffects::main);
  EXPECT_EQ(f.matrix(), ContrastMatrix::treatment_control().matrix());
}

TEST(FactorialContrasts, TwoFactorMainEffects) {
  const MatrixXd f = factorial_contrasts(2, FactorialEffects::main).matrix();
  ASSERT_EQ(f.rows(), 4);
  ASSERT_EQ(f.cols(), 2);
  // +-1 design matrix, scaled by (Q/2)^{-1} = 1/2.
  MatrixXd design(4, 2);
  design << -1, -1, 1, -1, -1, 1, 1, 1;
  EXPECT_TRUE(f.isApprox(design / 2.0));
  EXPECT_NEAR(f.col(0).dot(f.col(1)), 0.0, 1e-15);
}

TEST(FactorialContrasts, ShapesAndOrthogonality) {
  for (int k = 1; k <= 8; ++k) {
    for (auto which : {FactorialEffects::main, FactorialEffects::main_and_two_way}) {
      const MatrixXd f = factorial_contrasts(k, which).matrix();
      const int q = 1 << k;
      const int h = which == FactorialEffects::main ? k : k * (k + 1) / 2;
      ASSERT_EQ(f.rows(), q);
      ASSERT_EQ(f.cols(), h);
      EXPECT_TRUE((f.array().abs() - 2.0 / q).abs().maxCoeff() == 0.0);
      EXPECT_LE(f.colwise().sum().cwiseAbs().maxCoeff(), 1e-14);
      const MatrixXd g = f.transpose() * f;
      EXPECT_TRUE(g.isApprox(MatrixXd::Identity(h, h) * (4.0 / q)));
    }
  }
}

TEST(FactorialContrasts, RangeChecked) {
  EXPECT_THROW(factorial_contrasts(0, FactorialEffects::main), InvalidInput);
  EXPECT_THROW(factorial_contrasts(21, FactorialEffects::main), InvalidInput);
  EXPECT_THROW(factorial_contrasts(20, FactorialEffects::main_and_two_way), Infeasible);
}

TEST(CovariateMatrix, CenteringAndCovariance) {
  const MatrixXd x = random_matrix(12, 3, 8).array() + 5.0;
  const CovariateMatrix c(x);
  const CovariateMatrix cc = c.centered();
  EXPECT_TRUE(cc.is_centered());
  EXPECT_TRUE(cc.means().isApprox(c.means()));
  EXPECT_LE(cc.values().colwise().sum().cwiseAbs().maxCoeff(), 1e-12 * 12 * 10);
  EXPECT_TRUE(c.covariance().isApprox(cc.covariance(), 1e-12));
  const MatrixXd d = x.rowwise() - x.colwise().mean();
  EXPECT_TRUE(c.covariance().isApprox(d.transpose() * d / 11.0, 1e-12));
}
