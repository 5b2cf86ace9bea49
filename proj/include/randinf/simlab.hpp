#pragma once

// Experiment harness: exact enumeration audits, repeated-sampling studies over
// a fixed science table, ReM limit-law checks, and Berry-Esseen rate studies.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "randinf/perm_limits.hpp"
#include "randinf/rng.hpp"
#include "randinf/science.hpp"

namespace randinf {

inline constexpr int kSimSchemaVersion = 1;

enum class DgpKind { additive_effect, linear_homoskedastic, linear_heteroskedastic, heavy_tail };

// Y_i(q) = (q - 1) effect + X_i'beta + heterogeneity (q - 1) X_i1 + sigma_i(q) e_i(q)
//
//   additive_effect         e_i(q) = e_i, sigma = 1, heterogeneity ignored
//   linear_homoskedastic    e_i(q) iid N(0, 1), sigma = 1
//   linear_heteroskedastic  e_i(q) iid N(0, 1), sigma_i(q) = (0.5 + |X_i1|)(1 + (q - 1)/2)
//   heavy_tail              e_i(q) iid t_3 / sqrt(3), sigma = 1
//
// X has unit-variance equicorrelated Gaussian columns; beta is proportional to
// the ones vector, scaled so Var(X'beta) / (Var(X'beta) + 1) = r2.
struct DgpSpec {
  int units = 100;
  int arms = 2;
  int dims = 0;
  DgpKind kind = DgpKind::additive_effect;
  double effect = 1.0;
  double r2 = 0.0;
  double heterogeneity = 0.0;
  double correlation = 0.0;
  std::uint64_t seed = 0;
};

void validate(const DgpSpec& spec);

struct GeneratedData {
  ScienceTable table;
  std::optional<CovariateMatrix> covariates;
};

GeneratedData generate(const DgpSpec& spec);

const char* dgp_name(DgpKind kind);
DgpKind parse_dgp(const std::string& name);

struct AuditResult {
  std::size_t support = 0;
  VectorXd truth;
  VectorXd mean_estimate;
  MatrixXd estimate_covariance;  // exact, over the support
  MatrixXd oracle_covariance;    // closed form
  MatrixXd mean_vhat;            // E[Neyman variance]
  MatrixXd expected_vhat;        // F' diag(S(q,q) / N_q) F
};

// Full enumeration of the CRE with the given counts. Every N_q must be >= 2.
AuditResult exact_audit(const ScienceTable& table, std::span<const int> counts, const ContrastMatrix& contrast);

enum class SimDesignKind { cre, rem };

struct SimDesign {
  SimDesignKind kind = SimDesignKind::cre;
  int treated = 0;  // N_1; N_0 = N - N_1
  double threshold = 0.0;
  std::size_t max_draws = 1'000'000;
};

enum class SimEstimator {
  neyman,  // difference in means, Neyman variance, Wald interval
  ancova,  // additive regression adjustment, HC2 sandwich
  lin,     // interacted regression adjustment, HC2 sandwich
  rem,     // difference in means, ReM limit-law interval
};

const char* estimator_name(SimEstimator e);
SimEstimator parse_estimator(const std::string& name);
const char* design_name(SimDesignKind d);

struct SimSettings {
  std::size_t replications = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int workers = 1;
  std::size_t rem_reference_draws = 100'000;
};

struct SimResult {
  std::string estimator;
  std::string design;
  std::size_t replications = 0;
  double truth = 0.0;
  double bias = 0.0;
  double mc_variance = 0.0;
  double mean_vhat = 0.0;
  double coverage = 0.0;
  double mean_length = 0.0;
  double se_bias = 0.0;
  double se_variance = 0.0;  // mc_variance sqrt(2 / (R - 1))
  double se_mean_vhat = 0.0;
  double se_coverage = 0.0;
  double mean_draws = 1.0;   // assignment draws per accepted assignment
};

struct SimStudy {
  std::vector<SimResult> results;
  // Per replicate, one column per estimator.
  MatrixXd estimates;
  MatrixXd variances;
  MatrixXd lengths;
};

// Repeated sampling of the design over the fixed science table generated by
// `dgp`. Replicate r uses the stream replicate_stream(seed, r), so the output
// is bitwise identical for any worker count. Two arms only.
SimStudy repeated_sampling(const DgpSpec& dgp, const SimDesign& design, const std::vector<SimEstimator>& estimators,
                           const SimSettings& settings);

// Squared multiple correlation between the difference in means and the
// covariate difference in means under the CRE, from the science table.
double rem_population_r2(const ScienceTable& table, const CovariateMatrix& x, int treated);

enum class RemReferenceKind { convolution, normal };

struct RemCheck {
  double distance = 0.0;
  double mc_error = 0.0;  // 0.87 sqrt(1/R + 1/M), the typical distance under equal laws
  double r2 = 0.0;
  double acceptance = 0.0;
  std::size_t accepted = 0;
  std::size_t reference = 0;
  double mean_draws = 0.0;
};

// Accepted ReM draws of (tau_hat - tau) / sd_CRE(tau_hat) against samples of
// sqrt(1 - R^2) eps + sqrt(R^2) L_{K,a} (or eps alone for the normal control).
RemCheck rem_distribution_check(const DgpSpec& dgp, int treated, double threshold, std::size_t accepted,
                                std::size_t reference, std::uint64_t seed,
                                RemReferenceKind kind = RemReferenceKind::convolution, int workers = 1);

struct RateResult {
  std::vector<int> units;
  std::vector<double> distances;
  std::vector<double> mc_errors;
  std::vector<double> bounds;  // bolthausen_bound of the normalized kernel
  double slope = 0.0;          // least-squares slope of log distance on log N
  double intercept = 0.0;
};

RateResult rate_experiment(const std::function<PermKernel(int)>& family, const std::vector<int>& grid,
                           std::size_t draws, std::uint64_t seed, int workers = 1);

// Least-squares slope of log y on log x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept = nullptr);

std::string sim_results_csv(const std::vector<SimResult>& results);
std::string rate_csv(const RateResult& rate);

}  // namespace randinf
