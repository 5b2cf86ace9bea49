#pragma once

// Point estimators: arm-mean contrasts, regression adjustment, fixed-coefficient
// adjustment, the leverage-debiased interacted estimator, and the stratified,
// matched-pair and cluster estimators.

#include <map>
#include <vector>

#include "randinf/science.hpp"

namespace randinf {

// Arm sample means Yhat(1..Q). Throws on an empty arm.
VectorXd arm_means(const ObservedData& obs);

VectorXd contrast_estimate(const ObservedData& obs, const ContrastMatrix& contrast);

// Treated mean minus control mean.
double difference_in_means(const ObservedData& obs);

enum class AdjustMode {
  none,        // y ~ arm indicators
  additive,    // y ~ arm indicators + centered x
  interacted,  // y ~ arm indicators * centered x, fit arm by arm
};

struct RegressionFit {
  AdjustMode mode = AdjustMode::none;
  VectorXd gamma;          // adjusted arm means (arm intercepts under centered x)
  VectorXd tau;            // F' gamma
  MatrixXd slopes;         // K x Q; additive mode repeats the shared slope
  VectorXd residuals;
  VectorXd leverages;      // diagonal of the hat matrix of the full design
  VectorXd covariate_means;
  MatrixXd gamma_cov_hc0;  // sandwich covariance of gamma (EHW)
  MatrixXd gamma_cov_hc2;  // same with e_i^2 / (1 - h_ii)
};

// Covariates are centered internally. Rank deficiency throws Infeasible;
// interacted mode needs N_q >= K + 2 in every arm.
RegressionFit regression_adjusted(const ObservedData& obs, const CovariateMatrix& x, AdjustMode mode,
                                  const ContrastMatrix& contrast);

struct FixedAdjustment {
  double tau = 0.0;
  double gamma_treated = 0.0;
  double gamma_control = 0.0;
};

// tau(b1, b0) = {Yhat(1) - (Xhat(1) - Xbar)'b1} - {Yhat(0) - (Xhat(0) - Xbar)'b0}
// with b1 the treated-arm coefficient.
FixedAdjustment adjusted_with_coefficients(const ObservedData& obs, const CovariateMatrix& x,
                                           const VectorXd& beta_treated, const VectorXd& beta_control);

struct DebiasedEstimate {
  double tau = 0.0;
  double tau_lin = 0.0;
  double delta_treated = 0.0;
  double delta_control = 0.0;
  double kappa = 0.0;  // max leverage
  VectorXd leverages;
  bool inference_supported = false;
};

// Leverages come from the hat matrix of the centered covariate matrix.
DebiasedEstimate debiased_lin(const ObservedData& obs, const CovariateMatrix& x);

struct StratifiedEstimate {
  double tau = 0.0;
  std::vector<int> strata;  // labels in ascending order
  std::vector<double> stratum_tau;
  std::vector<double> weights;  // N_[k] / N
  std::vector<int> sizes;
  std::vector<int> treated;
};

StratifiedEstimate sre_estimate(const ObservedData& obs);

struct PairedEstimate {
  double tau = 0.0;
  std::vector<int> pairs;
  std::vector<double> differences;  // treated minus control, per pair
};

PairedEstimate mpe_estimate(const ObservedData& obs);

enum class ClusterMethod { unit_average, cluster_total };

double cluster_estimate(const ObservedData& obs, ClusterMethod method = ClusterMethod::cluster_total);

// Stratum / pair / cluster label -> unit indices, ordered by label.
std::map<int, std::vector<int>> group_units(const Assignment& a);

}  // namespace randinf
