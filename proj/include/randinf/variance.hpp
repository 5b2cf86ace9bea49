#pragma once

// Variance estimators, oracle variances, Wald intervals and regions, and
// rerandomization inference through the constrained-Gaussian limit.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "randinf/estimators.hpp"
#include "randinf/rng.hpp"
#include "randinf/science.hpp"

namespace randinf {

// Arm sample variances Shat(q, q); every arm needs N_q >= 2.
VectorXd arm_sample_variances(const ObservedData& obs);

// F' diag(Shat(q,q) / N_q) F.
MatrixXd neyman_var(const ObservedData& obs, const ContrastMatrix& contrast);

// F' diag(S(q,q) / N_q) F - F'SF / N. Needs the full science table.
MatrixXd true_var_oracle(const ScienceTable& table, std::span<const int> counts, const ContrastMatrix& contrast);

struct HcVariances {
  double ols = 0.0;
  double ehw = 0.0;
  double hc2 = 0.0;
};

// Sandwich variances of the slope in the regression y ~ (1, Z).
HcVariances ols_hc_variances(const ObservedData& obs);

// Conservative variance of tau(b1, b0): per-arm sample variance of the
// adjusted outcomes divided by N_q, summed.
double adjusted_var(const ObservedData& obs, const CovariateMatrix& x, const VectorXd& beta_treated,
                    const VectorXd& beta_control);

// F' Cov(gamma) F for a regression fit, from the HC0 or HC2 sandwich.
enum class Sandwich { hc0, hc2 };
MatrixXd regression_variance(const RegressionFit& fit, const ContrastMatrix& contrast, Sandwich kind = Sandwich::hc0);

// Stratified estimator variance for stratum labels; paired-difference
// variance for pair labels.
double sre_mpe_var(const ObservedData& obs);

// Neyman variance of the cluster-total estimator, treating the scaled
// totals (M/N) T_c as cluster-level outcomes. Needs M_q >= 2 per arm.
double cluster_total_var(const ObservedData& obs);

enum class IntervalKind { none, interval, region };

struct EstimateReport {
  std::string method;
  VectorXd estimate;
  MatrixXd variance;  // variance of the estimate itself
  double alpha = 0.05;
  IntervalKind kind = IntervalKind::none;
  double critical = 0.0;  // z_{alpha/2}, chi-square(H) quantile, or the ReM |limit| quantile
  VectorXd lower;
  VectorXd upper;
  std::map<std::string, double> extras;
  std::map<std::string, std::string> tags;  // quantity -> formula it comes from
  std::vector<std::string> warnings;

  bool contains(const VectorXd& value) const;
};

enum class WaldMode { interval, region };

// interval: H = 1, estimate +- z_{alpha/2} sqrt(V). region: Wald ellipsoid with
// the chi-square(H) upper-alpha quantile; singular V throws Infeasible.
EstimateReport wald(const VectorXd& estimate, const MatrixXd& variance, double alpha, WaldMode mode,
                    std::string method = "wald");

struct ConstrainedGaussianSpec {
  int dims = 1;
  double threshold = 0.0;  // +inf means unconstrained
};

// First coordinate of a K-variate standard Gaussian D conditioned on D'D <= a,
// by rejection. Acceptance below 1e-6 throws Infeasible.
std::vector<double> sample_constrained_gaussian(const ConstrainedGaussianSpec& spec, std::size_t n, RngSeed seed);

// Exact Var(L_{K,a}) = P(chi2_{K+2} <= a) / P(chi2_K <= a).
double constrained_gaussian_variance(const ConstrainedGaussianSpec& spec);

// Paired draws (eps_0, L_{K,a}) reused across R^2 values.
struct RemReference {
  int dims = 1;
  double threshold = 0.0;
  std::vector<double> eps;
  std::vector<double> constrained;
};

RemReference rem_reference_draws(int dims, double threshold, std::size_t reps, RngSeed seed);

// Lower empirical quantile of |sqrt(1 - r2) eps + sqrt(r2) L| at 1 - alpha.
double rem_limit_quantile(const RemReference& ref, double r2, double alpha);

struct RemPlugins {
  double tau = 0.0;
  double vhat = 0.0;  // N (Shat(1)/N_1 + Shat(0)/N_0)
  double r2 = 0.0;    // clamped to [0, 1]
  double vr2 = 0.0;   // unclamped numerator
};

RemPlugins rem_plugins(const ObservedData& obs, const CovariateMatrix& x);

EstimateReport rem_inference(const ObservedData& obs, const CovariateMatrix& x, double threshold, double alpha,
                             const RemReference& ref);
EstimateReport rem_inference(const ObservedData& obs, const CovariateMatrix& x, double threshold, double alpha,
                             std::size_t mc_reps, RngSeed seed);

}  // namespace randinf
