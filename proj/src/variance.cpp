#include "randinf/variance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "randinf/distributions.hpp"
#include "randinf/errors.hpp"
#include "randinf/linalg.hpp"

namespace randinf {
namespace {

constexpr double kMinAcceptance = 1e-6;

void require_two_arms(const ObservedData& obs, const char* what) {
  if (obs.assignment.arm_count() != 2) throw InvalidInput(std::string(what) + " is defined for two arms");
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
}

double sample_var(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double acceptance(const ConstrainedGaussianSpec& spec) {
  if (spec.dims < 1) throw InvalidInput("constrained Gaussian needs K >= 1");
  if (!(spec.threshold > 0.0)) throw InvalidInput("constrained Gaussian needs a > 0");
  return std::isinf(spec.threshold) ? 1.0 : dist::chi_squared_cdf(spec.dims, spec.threshold);
}

}  // namespace

VectorXd arm_sample_variances(const ObservedData& obs) {
  const Assignment& a = obs.assignment;
  const VectorXd means = arm_means(obs);
  VectorXd ss = VectorXd::Zero(a.arm_count());
  for (int i = 0; i < obs.units(); ++i) {
    const double d = obs.y(i) - means(a.arm(i) - 1);
    ss(a.arm(i) - 1) += d * d;
  }
  for (int q = 1; q <= a.arm_count(); ++q) {
    if (a.count(q) < 2) {
      throw InvalidInput("arm " + std::to_string(q) + " has fewer than two units; its sample variance is undefined");
    }
    ss(q - 1) /= a.count(q) - 1;
  }
  return ss;
}

MatrixXd neyman_var(const ObservedData& obs, const ContrastMatrix& contrast) {
  if (contrast.arms() != obs.assignment.arm_count()) throw InvalidInput("contrast rows differ from arm count");
  const VectorXd s = arm_sample_variances(obs);
  VectorXd d(s.size());
  for (Eigen::Index q = 0; q < s.size(); ++q) d(q) = s(q) / obs.assignment.count(static_cast<int>(q) + 1);
  const MatrixXd& f = contrast.matrix();
  return f.transpose() * d.asDiagonal() * f;
}

MatrixXd true_var_oracle(const ScienceTable& table, std::span<const int> counts, const ContrastMatrix& contrast) {
  if (counts.size() != static_cast<std::size_t>(table.arms())) throw InvalidInput("counts length differs from Q");
  int total = 0;
  for (int c : counts) {
    if (c < 1) throw InvalidInput("arm counts must be positive");
    total += c;
  }
  if (total != table.units()) throw InvalidInput("arm counts do not sum to N");
  const FpMoments m = fp_moments(table, contrast);
  VectorXd d(table.arms());
  for (int q = 0; q < table.arms(); ++q) d(q) = m.covariance(q, q) / counts[static_cast<std::size_t>(q)];
  const MatrixXd& f = contrast.matrix();
  return f.transpose() * d.asDiagonal() * f - m.effect_covariance / table.units();
}

HcVariances ols_hc_variances(const ObservedData& obs) {
  require_two_arms(obs, "OLS variance comparison");
  const Assignment& a = obs.assignment;
  const int n = obs.units();
  if (a.count(1) < 2 || a.count(2) < 2 || n < 3) throw InvalidInput("OLS variances need N_q >= 2 in both arms");
  MatrixXd d(n, 2);
  for (int i = 0; i < n; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = a.arm(i) == kTreatedArm ? 1.0 : 0.0;
  }
  const linalg::LeastSquaresFit fit = linalg::least_squares(d, obs.y, "regression on the treatment indicator");
  HcVariances out;
  const double sigma2 = fit.residuals.squaredNorm() / (n - 2);
  out.ols = sigma2 * (fit.g.transpose() * fit.g)(1, 1);
  out.ehw = fit.hc0()(1, 1);
  out.hc2 = fit.hc2()(1, 1);
  return out;
}

double adjusted_var(const ObservedData& obs, const CovariateMatrix& x, const VectorXd& beta_treated,
                    const VectorXd& beta_control) {
  const FixedAdjustment adj = adjusted_with_coefficients(obs, x, beta_treated, beta_control);
  const Assignment& a = obs.assignment;
  const int n1 = a.count(kTreatedArm), n0 = a.count(kControlArm);
  if (n1 < 2 || n0 < 2) throw InvalidInput("adjusted variance needs N_q >= 2 in both arms");
  double s1 = 0.0, s0 = 0.0;
  for (int i = 0; i < obs.units(); ++i) {
    const VectorXd dx = x.values().row(i).transpose() - x.means();
    if (a.arm(i) == kTreatedArm) {
      const double r = obs.y(i) - adj.gamma_treated - dx.dot(beta_treated);
      s1 += r * r;
    } else {
      const double r = obs.y(i) - adj.gamma_control - dx.dot(beta_control);
      s0 += r * r;
    }
  }
  return s1 / (static_cast<double>(n1) * (n1 - 1)) + s0 / (static_cast<double>(n0) * (n0 - 1));
}

MatrixXd regression_variance(const RegressionFit& fit, const ContrastMatrix& contrast, Sandwich kind) {
  const MatrixXd& cov = kind == Sandwich::hc0 ? fit.gamma_cov_hc0 : fit.gamma_cov_hc2;
  if (contrast.arms() != cov.rows()) throw InvalidInput("contrast rows differ from arm count");
  return contrast.matrix().transpose() * cov * contrast.matrix();
}

double sre_mpe_var(const ObservedData& obs) {
  require_two_arms(obs, "stratified variance");
  const Assignment& a = obs.assignment;
  if (a.structure() == Structure::pair) {
    const PairedEstimate p = mpe_estimate(obs);
    const double n = static_cast<double>(p.differences.size());
    if (n < 2) throw InvalidInput("matched-pair variance needs at least two pairs");
    double s = 0.0;
    for (double d : p.differences) s += (d - p.tau) * (d - p.tau);
    return s / (n * (n - 1));
  }
  if (a.structure() != Structure::stratum) throw InvalidInput("stratified variance needs stratum or pair labels");
  const double n = obs.units();
  double v = 0.0;
  for (const auto& [label, units] : group_units(a)) {
    std::vector<double> y1, y0;
    for (int i : units) (a.arm(i) == kTreatedArm ? y1 : y0).push_back(obs.y(i));
    if (y1.size() < 2 || y0.size() < 2) {
      throw InvalidInput("stratum " + std::to_string(label) +
                         " has fewer than two units in an arm; analyze it as a matched-pair design");
    }
    const double w = static_cast<double>(units.size()) / n;
    v += w * w * (sample_var(y1) / static_cast<double>(y1.size()) + sample_var(y0) / static_cast<double>(y0.size()));
  }
  return v;
}

double cluster_total_var(const ObservedData& obs) {
  require_two_arms(obs, "cluster variance");
  if (obs.assignment.structure() != Structure::cluster) throw InvalidInput("cluster variance: assignment lacks cluster labels");
  const auto groups = group_units(obs.assignment);
  const double scale = static_cast<double>(groups.size()) / obs.units();
  std::vector<double> treated, control;
  for (const auto& [label, units] : groups) {
    double total = 0.0;
    for (int i : units) {
      if (obs.assignment.arm(i) != obs.assignment.arm(units[0])) {
        throw InvalidInput("cluster " + std::to_string(label) + " mixes treatment arms");
      }
      total += obs.y(i);
    }
    (obs.assignment.arm(units[0]) == kTreatedArm ? treated : control).push_back(scale * total);
  }
  if (treated.size() < 2 || control.size() < 2) throw InvalidInput("cluster variance needs at least two clusters per arm");
  return sample_var(treated) / static_cast<double>(treated.size()) +
         sample_var(control) / static_cast<double>(control.size());
}

bool EstimateReport::contains(const VectorXd& value) const {
  if (value.size() != estimate.size()) throw InvalidInput("contains: dimension mismatch");
  switch (kind) {
    case IntervalKind::interval:
      return (value.array() >= lower.array()).all() && (value.array() <= upper.array()).all();
    case IntervalKind::region: {
      const VectorXd d = estimate - value;
      return d.dot(variance.ldlt().solve(d)) <= critical;
    }
    case IntervalKind::none:
      break;
  }
  throw InvalidInput("report carries no interval or region");
}

EstimateReport wald(const VectorXd& estimate, const MatrixXd& variance, double alpha, WaldMode mode,
                    std::string method) {
  check_alpha(alpha);
  const Eigen::Index h = estimate.size();
  if (h < 1 || variance.rows() != h || variance.cols() != h) throw InvalidInput("wald: estimate and variance shapes differ");
  if (!variance.allFinite()) throw InvalidInput("wald: variance has non-finite entries");
  EstimateReport r;
  r.method = std::move(method);
  r.estimate = estimate;
  r.variance = variance;
  r.alpha = alpha;
  if (mode == WaldMode::interval) {
    if (h != 1) throw InvalidInput("wald interval needs a scalar estimand; use region mode for H > 1");
    if (variance(0, 0) < 0.0) throw InvalidInput("wald: negative variance");
    r.kind = IntervalKind::interval;
    r.critical = dist::normal_two_sided_critical(alpha);
    const double half = r.critical * std::sqrt(variance(0, 0));
    r.lower = estimate.array() - half;
    r.upper = estimate.array() + half;
    r.tags["critical"] = "normal two-sided quantile z_{alpha/2}";
    r.tags["interval"] = "estimate +- z_{alpha/2} sqrt(variance)";
  } else {
    linalg::require_well_conditioned(variance, "Wald region variance");
    r.kind = IntervalKind::region;
    r.critical = dist::chi_squared_quantile(static_cast<double>(h), 1.0 - alpha);
    r.tags["critical"] = "chi-square(H) upper-alpha quantile";
    r.tags["region"] = "(estimate - tau)' V^{-1} (estimate - tau) <= critical";
  }
  return r;
}

std::vector<double> sample_constrained_gaussian(const ConstrainedGaussianSpec& spec, std::size_t n, RngSeed seed) {
  if (n < 1) throw InvalidInput("constrained Gaussian sampler needs n >= 1");
  const double p = acceptance(spec);
  if (p < kMinAcceptance) {
    throw Infeasible("constrained Gaussian acceptance probability " + std::to_string(p) + " is below 1e-6");
  }
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  const bool unconstrained = std::isinf(spec.threshold);
  while (out.size() < n) {
    const double first = rng.normal();
    double norm2 = first * first;
    for (int k = 1; k < spec.dims; ++k) {
      const double z = rng.normal();
      norm2 += z * z;
    }
    if (unconstrained || norm2 <= spec.threshold) out.push_back(first);
  }
  return out;
}

double constrained_gaussian_variance(const ConstrainedGaussianSpec& spec) {
  const double p = acceptance(spec);
  if (std::isinf(spec.threshold)) return 1.0;
  return dist::chi_squared_cdf(spec.dims + 2, spec.threshold) / p;
}

RemReference rem_reference_draws(int dims, double threshold, std::size_t reps, RngSeed seed) {
  RemReference ref;
  ref.dims = dims;
  ref.threshold = threshold;
  ref.constrained = sample_constrained_gaussian({dims, threshold}, reps, seed);
  Rng rng({mix64(seed.seed ^ 0x5eedULL), seed.stream + 1});
  ref.eps.resize(reps);
  for (auto& e : ref.eps) e = rng.normal();
  return ref;
}

double rem_limit_quantile(const RemReference& ref, double r2, double alpha) {
  check_alpha(alpha);
  if (ref.eps.empty() || ref.eps.size() != ref.constrained.size()) throw InvalidInput("empty ReM reference draws");
  r2 = std::clamp(r2, 0.0, 1.0);
  const double a = std::sqrt(1.0 - r2), b = std::sqrt(r2);
  std::vector<double> v(ref.eps.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::fabs(a * ref.eps[i] + b * ref.constrained[i]);
  return dist::lower_empirical_quantile(std::move(v), 1.0 - alpha);
}

RemPlugins rem_plugins(const ObservedData& obs, const CovariateMatrix& x) {
  require_two_arms(obs, "rerandomization inference");
  const Assignment& a = obs.assignment;
  const int k = x.dims();
  const double n = obs.units(), n1 = a.count(kTreatedArm), n0 = a.count(kControlArm);
  if (n1 < k + 2 || n0 < k + 2) throw InvalidInput("rerandomization inference needs N_q >= K + 2 in both arms");
  const RegressionFit lin = regression_adjusted(obs, x, AdjustMode::interacted, ContrastMatrix::treatment_control());
  const VectorXd s = arm_sample_variances(obs);
  const MatrixXd sx = x.covariance();
  linalg::require_well_conditioned(sx, "covariate covariance S_X^2");
  const VectorXd delta = n0 / n * lin.slopes.col(kTreatedArm - 1) + n1 / n * lin.slopes.col(kControlArm - 1);

  RemPlugins p;
  p.tau = difference_in_means(obs);
  p.vhat = n * (s(kTreatedArm - 1) / n1 + s(kControlArm - 1) / n0);
  p.vr2 = n * delta.dot(((1.0 / n1 + 1.0 / n0) * sx) * delta);
  p.r2 = p.vhat > 0.0 ? std::clamp(p.vr2 / p.vhat, 0.0, 1.0) : 0.0;
  return p;
}

EstimateReport rem_inference(const ObservedData& obs, const CovariateMatrix& x, double threshold, double alpha,
                             const RemReference& ref) {
  check_alpha(alpha);
  if (ref.dims != x.dims()) throw InvalidInput("ReM reference dimension differs from covariate count");
  if (ref.threshold != threshold) throw InvalidInput("ReM reference threshold differs from the design threshold");
  const RemPlugins p = rem_plugins(obs, x);
  const double n = obs.units();
  const double se = std::sqrt(p.vhat / n);
  const double q = rem_limit_quantile(ref, p.r2, alpha);

  EstimateReport r;
  r.method = "rem";
  r.estimate = VectorXd::Constant(1, p.tau);
  r.variance = MatrixXd::Constant(1, 1, p.vhat / n);
  r.alpha = alpha;
  r.kind = IntervalKind::interval;
  r.critical = q;
  r.lower = VectorXd::Constant(1, p.tau - q * se);
  r.upper = VectorXd::Constant(1, p.tau + q * se);
  r.extras["vhat"] = p.vhat;
  r.extras["r2"] = p.r2;
  r.extras["vr2"] = p.vr2;
  r.extras["half_width"] = q * se;
  r.extras["cre_half_width"] = dist::normal_two_sided_critical(alpha) * se;
  r.extras["mc_reps"] = static_cast<double>(ref.eps.size());
  r.extras["acceptance"] = std::isinf(threshold) ? 1.0 : dist::chi_squared_cdf(x.dims(), threshold);
  r.tags["estimate"] = "difference in means";
  r.tags["vhat"] = "N (Shat(1)/N_1 + Shat(0)/N_0)";
  r.tags["r2"] = "N delta' (1/N_1 + 1/N_0) S_X^2 delta / vhat, delta from arm-wise least squares";
  r.tags["interval"] = "estimate +- q_{1-alpha}|sqrt(1-R2) eps + sqrt(R2) L_{K,a}| sqrt(vhat/N)";
  return r;
}

EstimateReport rem_inference(const ObservedData& obs, const CovariateMatrix& x, double threshold, double alpha,
                             std::size_t mc_reps, RngSeed seed) {
  if (mc_reps < 1) throw InvalidInput("rem_inference needs mc_reps >= 1");
  return rem_inference(obs, x, threshold, alpha, rem_reference_draws(x.dims(), threshold, mc_reps, seed));
}

}  // namespace randinf
