#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "randinf/designs.hpp"
#include "randinf/distributions.hpp"
#include "randinf/errors.hpp"
#include "randinf/estimators.hpp"
#include "randinf/simlab.hpp"

using namespace randinf;

namespace {

DgpSpec spec(int n, int k, DgpKind kind, std::uint64_t seed, double r2 = 0.0, double het = 0.0) {
  DgpSpec s;
  s.units = n;
  s.dims = k;
  s.kind = kind;
  s.r2 = r2;
  s.heterogeneity = het;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Generate, ReproducibleAndAdditive) {
  const DgpSpec s = spec(30, 2, DgpKind::additive_effect, 4, 0.5);
  const GeneratedData a = generate(s), b = generate(s);
  EXPECT_EQ(a.table.outcomes(), b.table.outcomes());
  EXPECT_EQ(a.covariates->values(), b.covariates->values());
  const VectorXd tau = a.table.outcomes().col(1) - a.table.outcomes().col(0);
  EXPECT_LT((tau.array() - 1.0).abs().maxCoeff(), 1e-12);
  DgpSpec other = s;
  other.seed = 5;
  EXPECT_NE(generate(other).table.outcomes(), a.table.outcomes());
}

TEST(Generate, SignalShareMatchesR2) {
  const GeneratedData d = generate(spec(20000, 3, DgpKind::linear_homoskedastic, 6, 0.6));
  const VectorXd y0 = d.table.outcomes().col(0);
  const MatrixXd x = d.covariates->values();
  MatrixXd design(x.rows(), 4);
  design << VectorXd::Ones(x.rows()), x;
  const VectorXd coef = design.colPivHouseholderQr().solve(y0);
  const VectorXd resid = y0 - design * coef;
  const double r2 = 1.0 - resid.squaredNorm() / (y0.array() - y0.mean()).square().sum();
  EXPECT_NEAR(r2, 0.6, 0.02);
}

TEST(Generate, AllKindsAndValidation) {
  for (DgpKind k : {DgpKind::additive_effect, DgpKind::linear_homoskedastic, DgpKind::linear_heteroskedastic,
                    DgpKind::heavy_tail}) {
    DgpSpec s = spec(50, 1, k, 1, 0.3, 0.5);
    s.arms = 3;
    const GeneratedData d = generate(s);
    EXPECT_EQ(d.table.arms(), 3);
    EXPECT_TRUE(d.table.outcomes().allFinite());
    EXPECT_EQ(parse_dgp(dgp_name(k)), k);
  }
  EXPECT_THROW(generate(spec(3, 0, DgpKind::additive_effect, 1)), InvalidInput);
  EXPECT_THROW(generate(spec(30, 1, DgpKind::additive_effect, 1, 1.0)), InvalidInput);
  DgpSpec bad = spec(30, 3, DgpKind::additive_effect, 1);
  bad.correlation = -0.6;
  EXPECT_THROW(generate(bad), InvalidInput);
  EXPECT_THROW(parse_dgp("gaussian"), InvalidInput);
}

TEST(ExactAudit, AdditiveTableVhatIsExact) {
  const GeneratedData d = generate(spec(8, 0, DgpKind::additive_effect, 2));
  const int counts[2] = {4, 4};
  const AuditResult r = exact_audit(d.table, counts, ContrastMatrix::treatment_control());
  EXPECT_EQ(r.support, 70u);
  EXPECT_NEAR(r.mean_estimate(0), r.truth(0), 1e-12);
  EXPECT_NEAR(r.estimate_covariance(0, 0), r.oracle_covariance(0, 0), 1e-12);
  EXPECT_NEAR(r.mean_vhat(0, 0), r.expected_vhat(0, 0), 1e-12);
  EXPECT_NEAR(r.mean_vhat(0, 0), r.estimate_covariance(0, 0), 1e-12);
}

TEST(ExactAudit, HeterogeneousGapIsEffectVariance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GeneratedData d = generate(spec(9, 1, DgpKind::linear_heteroskedastic, seed, 0.3, 1.0));
    const int counts[2] = {5, 4};
    const AuditResult r = exact_audit(d.table, counts, ContrastMatrix::treatment_control());
    std::vector<double> tau;
    for (int i = 0; i < 9; ++i) tau.push_back(d.table.outcome(i, 2) - d.table.outcome(i, 1));
    EXPECT_NEAR(r.mean_estimate(0), r.truth(0), 1e-12);
    EXPECT_NEAR(r.estimate_covariance(0, 0), r.oracle_covariance(0, 0), 1e-12);
    EXPECT_NEAR(r.mean_vhat(0, 0), r.expected_vhat(0, 0), 1e-12);
    const double gap = oracle::var(tau) / 9.0;
    EXPECT_GT(gap, 0.0);
    EXPECT_NEAR(r.mean_vhat(0, 0) - r.estimate_covariance(0, 0), gap, 1e-12);
  }
}

TEST(ExactAudit, ThreeArmsAndErrors) {
  DgpSpec s = spec(7, 0, DgpKind::heavy_tail, 3);
  s.arms = 3;
  const GeneratedData d = generate(s);
  MatrixXd f(3, 2);
  f << -1, -1, 1, 0, 0, 1;
  const int counts[3] = {2, 2, 3};
  const AuditResult r = exact_audit(d.table, counts, ContrastMatrix(f));
  EXPECT_EQ(r.support, 210u);
  EXPECT_LT((r.mean_estimate - r.truth).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r.estimate_covariance - r.oracle_covariance).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r.mean_vhat - r.expected_vhat).cwiseAbs().maxCoeff(), 1e-12);
  const int single[3] = {1, 3, 3};
  EXPECT_THROW(exact_audit(d.table, single, ContrastMatrix(f)), InvalidInput);
}

TEST(RepeatedSampling, DeterministicAcrossWorkers) {
  const DgpSpec d = spec(60, 2, DgpKind::linear_homoskedastic, 7, 0.5, 0.3);
  SimSettings one{150, 0.05, 42, 1};
  SimSettings three{150, 0.05, 42, 3};
  const std::vector<SimEstimator> est{SimEstimator::neyman, SimEstimator::ancova, SimEstimator::lin};
  const SimStudy a = repeated_sampling(d, {SimDesignKind::cre, 30}, est, one);
  const SimStudy b = repeated_sampling(d, {SimDesignKind::cre, 30}, est, three);
  EXPECT_EQ(a.estimates, b.estimates);
  EXPECT_EQ(a.variances, b.variances);
  EXPECT_EQ(sim_results_csv(a.results), sim_results_csv(b.results));
  const SimStudy c = repeated_sampling(d, {SimDesignKind::cre, 30}, est, one);
  EXPECT_EQ(sim_results_csv(a.results), sim_results_csv(c.results));
}

TEST(RepeatedSampling, RemDeterministicAcrossWorkers) {
  const DgpSpec d = spec(80, 2, DgpKind::additive_effect, 8, 0.7);
  const SimDesign design{SimDesignKind::rem, 40, threshold_from_acceptance(2, 0.2)};
  SimSettings s{120, 0.05, 3, 1, 5000};
  const SimStudy a = repeated_sampling(d, design, {SimEstimator::neyman, SimEstimator::rem}, s);
  s.workers = 2;
  const SimStudy b = repeated_sampling(d, design, {SimEstimator::neyman, SimEstimator::rem}, s);
  EXPECT_EQ(a.lengths, b.lengths);
  EXPECT_EQ(a.results[0].mean_draws, b.results[0].mean_draws);
  EXPECT_GT(a.results[0].mean_draws, 1.0);
}

TEST(RepeatedSampling, Incompatibilities) {
  const DgpSpec plain = spec(40, 0, DgpKind::additive_effect, 1);
  const SimSettings s{200, 0.05, 1};
  EXPECT_THROW(repeated_sampling(plain, {SimDesignKind::cre, 20}, {SimEstimator::lin}, s), InvalidInput);
  EXPECT_THROW(repeated_sampling(plain, {SimDesignKind::cre, 1}, {SimEstimator::neyman}, s), InvalidInput);
  EXPECT_THROW(repeated_sampling(plain, {SimDesignKind::cre, 20}, {SimEstimator::neyman}, {50, 0.05, 1}),
               InvalidInput);
  const DgpSpec cov = spec(40, 1, DgpKind::additive_effect, 1, 0.5);
  EXPECT_THROW(repeated_sampling(cov, {SimDesignKind::cre, 20}, {SimEstimator::rem}, s), InvalidInput);
  EXPECT_THROW(repeated_sampling(plain, {SimDesignKind::rem, 20, 1.0}, {SimEstimator::neyman}, s), InvalidInput);
  EXPECT_THROW(parse_estimator("ols"), InvalidInput);
}

TEST(RepeatedSampling, CoverageUnderAdditiveEffects) {
  const SimStudy st =
      repeated_sampling(spec(400, 0, DgpKind::additive_effect, 11), {SimDesignKind::cre, 200}, {SimEstimator::neyman},
                        {4000, 0.05, 21});
  const SimResult& r = st.results[0];
  EXPECT_GE(r.coverage, 0.94);
  EXPECT_LE(r.coverage, 0.965);
  EXPECT_LT(std::fabs(r.bias), 3.0 * r.se_bias + 1e-12);
  EXPECT_NEAR(r.mean_vhat, r.mc_variance, 3.0 * (r.se_variance + r.se_mean_vhat));
}

TEST(RepeatedSampling, HeterogeneousEffectsOverCover) {
  const SimStudy st = repeated_sampling(spec(400, 1, DgpKind::linear_heteroskedastic, 12, 0.3, 1.0),
                                        {SimDesignKind::cre, 200}, {SimEstimator::neyman}, {2000, 0.05, 22});
  const SimResult& r = st.results[0];
  EXPECT_GE(r.coverage, 0.95 - 3.0 * r.se_coverage);
  EXPECT_GT(r.mean_vhat, r.mc_variance);
}

TEST(RepeatedSampling, LinNoWorseThanNeyman) {
  DgpSpec d = spec(500, 3, DgpKind::linear_heteroskedastic, 13, 0.6, 0.5);
  d.correlation = 0.3;
  const SimStudy st =
      repeated_sampling(d, {SimDesignKind::cre, 250}, {SimEstimator::lin, SimEstimator::ancova, SimEstimator::neyman},
                        {1500, 0.05, 23});
  const SimResult &lin = st.results[0], &ancova = st.results[1], &ney = st.results[2];
  EXPECT_LE(lin.mc_variance, ney.mc_variance + 3.0 * std::hypot(lin.se_variance, ney.se_variance));
  EXPECT_LE(lin.mc_variance, ancova.mc_variance + 3.0 * std::hypot(lin.se_variance, ancova.se_variance));
  EXPECT_GE(lin.coverage, 0.95 - 3.0 * lin.se_coverage);
}

TEST(RepeatedSampling, RemReducesVarianceAndIntervalLength) {
  const DgpSpec d = spec(500, 2, DgpKind::additive_effect, 14, 0.8);
  const double a = threshold_from_acceptance(2, 0.05);
  const SimStudy rem =
      repeated_sampling(d, {SimDesignKind::rem, 250, a}, {SimEstimator::neyman, SimEstimator::rem}, {800, 0.05, 24, 1, 20000});
  const SimStudy cre = repeated_sampling(d, {SimDesignKind::cre, 250}, {SimEstimator::neyman}, {800, 0.05, 25});
  const SimResult &r = rem.results[0], &c = cre.results[0];
  EXPECT_GT(c.mc_variance - r.mc_variance, 3.0 * std::hypot(r.se_variance, c.se_variance));
  int shorter = 0;
  for (Eigen::Index i = 0; i < rem.lengths.rows(); ++i) shorter += rem.lengths(i, 1) < rem.lengths(i, 0);
  EXPECT_GT(shorter, 0.95 * static_cast<double>(rem.lengths.rows()));
  EXPECT_GE(rem.results[1].coverage, 0.95 - 3.0 * rem.results[1].se_coverage);
}

TEST(RemPopulationR2, MatchesEnumeration) {
  const GeneratedData d = generate(spec(10, 1, DgpKind::linear_homoskedastic, 15, 0.5, 0.4));
  const int counts[2] = {6, 4};
  std::vector<double> tau, taux;
  for (const auto& a : enumerate_cre(counts)) {
    tau.push_back(difference_in_means(observe(d.table, a)));
    taux.push_back(difference_in_means(ObservedData(d.covariates->values().col(0), a)));
  }
  const double mt = oracle::mean(tau), mx = oracle::mean(taux);
  double c = 0, vt = 0, vx = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    c += (tau[i] - mt) * (taux[i] - mx);
    vt += (tau[i] - mt) * (tau[i] - mt);
    vx += (taux[i] - mx) * (taux[i] - mx);
  }
  EXPECT_NEAR(rem_population_r2(d.table, *d.covariates, 4), c * c / (vt * vx), 1e-12);
}

TEST(RemDistributionCheck, UnconstrainedAndNegativeControl) {
  const DgpSpec d = spec(400, 2, DgpKind::additive_effect, 16, 0.8);
  const RemCheck flat =
      rem_distribution_check(d, 200, std::numeric_limits<double>::infinity(), 1000, 20000, 31);
  EXPECT_EQ(flat.mean_draws, 1.0);
  EXPECT_LT(flat.distance, 0.06);
  const double a = threshold_from_acceptance(2, 0.05);
  const RemCheck law = rem_distribution_check(d, 200, a, 1000, 20000, 32);
  EXPECT_LT(law.distance, 0.06);
  EXPECT_NEAR(law.acceptance, 0.05, 1e-12);
  const RemCheck wrong = rem_distribution_check(d, 200, a, 1000, 20000, 32, RemReferenceKind::normal);
  EXPECT_GT(wrong.distance, 0.05);
  EXPECT_THROW(rem_distribution_check(d, 200, 1e-9, 1000, 20000, 1), Infeasible);
}

TEST(RateExperiment, BoundedDecaysSpikedFlat) {
  const RateResult b = rate_experiment(bounded_two_point_kernel, {50, 200, 800}, 20000, 41);
  EXPECT_GE(b.slope, -0.8);
  EXPECT_LE(b.slope, -0.25);
  EXPECT_GT(b.distances[0], b.distances[2]);
  const RateResult s = rate_experiment(spiked_kernel, {50, 200, 800}, 20000, 42);
  EXPECT_NEAR(s.slope, 0.0, 0.1);
  EXPECT_EQ(rate_csv(b).substr(0, 15), "schema_version,");
  EXPECT_THROW(rate_experiment(spiked_kernel, {50, 200}, 1000, 1), InvalidInput);
  auto flat = [](int n) { return build_srs_kernel(VectorXd::Ones(n), n / 2); };
  EXPECT_THROW(rate_experiment(flat, {10, 20, 40}, 1000, 1), Infeasible);
}

TEST(RateExperiment, NormalSurrogateAtDkwFloor) {
  Rng rng({77, 0});
  std::vector<double> z(20000);
  for (auto& v : z) v = rng.normal();
  // P(sup > 1.63 / sqrt(R)) < 0.01 for exact normal draws.
  EXPECT_LT(dist::kolmogorov_to_normal(z), 1.63 / std::sqrt(20000.0));
}

TEST(LogLogSlope, ExactPowerLaw) {
  double c = 0.0;
  EXPECT_NEAR(log_log_slope({10, 100, 1000}, {2.0 / std::sqrt(10.0), 2.0 / 10.0, 2.0 / std::sqrt(1000.0)}, &c), -0.5,
              1e-12);
  EXPECT_NEAR(std::exp(c), 2.0, 1e-12);
  EXPECT_THROW(log_log_slope({1, 2}, {1, 0}), Infeasible);
}

TEST(SimCsv, SchemaVersionColumn) {
  SimResult r;
  r.estimator = "neyman";
  r.design = "cre";
  const std::string csv = sim_results_csv({r});
  EXPECT_EQ(csv.rfind("schema_version,estimator,design", 0), 0u);
  EXPECT_NE(csv.find("\n1,neyman,cre,"), std::string::npos);
}
