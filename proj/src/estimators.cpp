#include "randinf/estimators.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "randinf/errors.hpp"
#include "randinf/linalg.hpp"

namespace randinf {
namespace {

using linalg::least_squares;

void require_two_arms(const ObservedData& obs, const char* what) {
  if (obs.assignment.arm_count() != 2) throw InvalidInput(std::string(what) + " is defined for two arms");
}

void require_structure(const ObservedData& obs, Structure kind, const char* what) {
  if (obs.assignment.structure() != kind) throw InvalidInput(std::string(what) + ": assignment lacks the required labels");
}

}  // namespace

VectorXd arm_means(const ObservedData& obs) {
  const Assignment& a = obs.assignment;
  VectorXd sums = VectorXd::Zero(a.arm_count());
  for (int i = 0; i < obs.units(); ++i) sums(a.arm(i) - 1) += obs.y(i);
  for (int q = 1; q <= a.arm_count(); ++q) {
    if (a.count(q) == 0) throw InvalidInput("arm " + std::to_string(q) + " is empty");
    sums(q - 1) /= a.count(q);
  }
  return sums;
}

VectorXd contrast_estimate(const ObservedData& obs, const ContrastMatrix& contrast) {
  if (contrast.arms() != obs.assignment.arm_count()) throw InvalidInput("contrast rows differ from arm count");
  return contrast.matrix().transpose() * arm_means(obs);
}

double difference_in_means(const ObservedData& obs) {
  require_two_arms(obs, "difference in means");
  const VectorXd m = arm_means(obs);
  return m(kTreatedArm - 1) - m(kControlArm - 1);
}

RegressionFit regression_adjusted(const ObservedData& obs, const CovariateMatrix& x, AdjustMode mode,
                                  const ContrastMatrix& contrast) {
  const Assignment& a = obs.assignment;
  const int n = obs.units(), q = a.arm_count(), k = x.dims();
  if (x.units() != n) throw InvalidInput("covariate rows differ from unit count");
  if (contrast.arms() != q) throw InvalidInput("contrast rows differ from arm count");
  const CovariateMatrix xc_m = x.centered();
  const MatrixXd& xc = xc_m.values();

  RegressionFit fit;
  fit.mode = mode;
  fit.covariate_means = x.means();
  fit.residuals.resize(n);
  fit.leverages.resize(n);

  switch (mode) {
    case AdjustMode::none: {
      fit.gamma = arm_means(obs);
      fit.slopes = MatrixXd::Zero(k, q);
      VectorXd ss = VectorXd::Zero(q);
      for (int i = 0; i < n; ++i) {
        const int arm = a.arm(i);
        fit.residuals(i) = obs.y(i) - fit.gamma(arm - 1);
        fit.leverages(i) = 1.0 / a.count(arm);
        ss(arm - 1) += fit.residuals(i) * fit.residuals(i);
      }
      fit.gamma_cov_hc0 = MatrixXd::Zero(q, q);
      fit.gamma_cov_hc2 = MatrixXd::Zero(q, q);
      for (int j = 0; j < q; ++j) {
        const double nq = a.count(j + 1);
        fit.gamma_cov_hc0(j, j) = ss(j) / (nq * nq);
        fit.gamma_cov_hc2(j, j) = nq > 1 ? ss(j) / (nq * (nq - 1)) : std::numeric_limits<double>::infinity();
      }
      break;
    }
    case AdjustMode::additive: {
      MatrixXd d = MatrixXd::Zero(n, q + k);
      for (int i = 0; i < n; ++i) d(i, a.arm(i) - 1) = 1.0;
      d.rightCols(k) = xc;
      const linalg::LeastSquaresFit ls = least_squares(d, obs.y, "additive regression adjustment");
      fit.gamma = ls.coef.head(q);
      fit.slopes = ls.coef.tail(k).replicate(1, q);
      fit.residuals = ls.residuals;
      fit.leverages = ls.leverages;
      fit.gamma_cov_hc0 = ls.hc0().topLeftCorner(q, q);
      fit.gamma_cov_hc2 = ls.hc2().topLeftCorner(q, q);
      break;
    }
    case AdjustMode::interacted: {
      fit.gamma.resize(q);
      fit.slopes.resize(k, q);
      fit.gamma_cov_hc0 = MatrixXd::Zero(q, q);
      fit.gamma_cov_hc2 = MatrixXd::Zero(q, q);
      for (int arm = 1; arm <= q; ++arm) {
        const int nq = a.count(arm);
        if (nq < k + 2) {
          throw Infeasible("interacted adjustment: arm " + std::to_string(arm) + " has " + std::to_string(nq) +
                           " units, needs at least K + 2 = " + std::to_string(k + 2));
        }
        std::vector<int> idx;
        idx.reserve(static_cast<std::size_t>(nq));
        for (int i = 0; i < n; ++i) {
          if (a.arm(i) == arm) idx.push_back(i);
        }
        MatrixXd d(nq, k + 1);
        VectorXd y(nq);
        for (int r = 0; r < nq; ++r) {
          d(r, 0) = 1.0;
          d.row(r).tail(k) = xc.row(idx[static_cast<std::size_t>(r)]);
          y(r) = obs.y(idx[static_cast<std::size_t>(r)]);
        }
        const linalg::LeastSquaresFit ls = least_squares(d, y, "interacted adjustment, arm " + std::to_string(arm));
        fit.gamma(arm - 1) = ls.coef(0);
        fit.slopes.col(arm - 1) = ls.coef.tail(k);
        for (int r = 0; r < nq; ++r) {
          fit.residuals(idx[static_cast<std::size_t>(r)]) = ls.residuals(r);
          fit.leverages(idx[static_cast<std::size_t>(r)]) = ls.leverages(r);
        }
        fit.gamma_cov_hc0(arm - 1, arm - 1) = ls.hc0()(0, 0);
        fit.gamma_cov_hc2(arm - 1, arm - 1) = ls.hc2()(0, 0);
      }
      break;
    }
  }
  fit.tau = contrast.matrix().transpose() * fit.gamma;
  return fit;
}

FixedAdjustment adjusted_with_coefficients(const ObservedData& obs, const CovariateMatrix& x,
                                           const VectorXd& beta_treated, const VectorXd& beta_control) {
  require_two_arms(obs, "fixed-coefficient adjustment");
  if (x.units() != obs.units()) throw InvalidInput("covariate rows differ from unit count");
  if (beta_treated.size() != x.dims() || beta_control.size() != x.dims()) {
    throw InvalidInput("adjustment coefficients must have length K = " + std::to_string(x.dims()));
  }
  const Assignment& a = obs.assignment;
  const int n1 = a.count(kTreatedArm), n0 = a.count(kControlArm);
  if (n1 == 0 || n0 == 0) throw InvalidInput("fixed-coefficient adjustment needs both arms nonempty");
  VectorXd x1 = VectorXd::Zero(x.dims()), x0 = VectorXd::Zero(x.dims());
  double y1 = 0.0, y0 = 0.0;
  for (int i = 0; i < obs.units(); ++i) {
    if (a.arm(i) == kTreatedArm) {
      x1 += x.values().row(i).transpose();
      y1 += obs.y(i);
    } else {
      x0 += x.values().row(i).transpose();
      y0 += obs.y(i);
    }
  }
  FixedAdjustment out;
  out.gamma_treated = y1 / n1 - (x1 / n1 - x.means()).dot(beta_treated);
  out.gamma_control = y0 / n0 - (x0 / n0 - x.means()).dot(beta_control);
  out.tau = out.gamma_treated - out.gamma_control;
  return out;
}

DebiasedEstimate debiased_lin(const ObservedData& obs, const CovariateMatrix& x) {
  require_two_arms(obs, "debiased adjustment");
  const RegressionFit lin = regression_adjusted(obs, x, AdjustMode::interacted, ContrastMatrix::treatment_control());
  const linalg::LeastSquaresFit hat = least_squares(x.centered().values(), VectorXd::Zero(x.units()), "covariate hat matrix");

  DebiasedEstimate out;
  out.tau_lin = lin.tau(0);
  out.leverages = hat.leverages;
  out.kappa = hat.leverages.maxCoeff();
  const Assignment& a = obs.assignment;
  for (int i = 0; i < obs.units(); ++i) {
    const double term = lin.residuals(i) * hat.leverages(i);
    (a.arm(i) == kTreatedArm ? out.delta_treated : out.delta_control) += term;
  }
  const double n1 = a.count(kTreatedArm), n0 = a.count(kControlArm);
  out.delta_treated /= n1;
  out.delta_control /= n0;
  out.tau = out.tau_lin - (n1 / n0 * out.delta_control - n0 / n1 * out.delta_treated);
  return out;
}

std::map<int, std::vector<int>> group_units(const Assignment& a) {
  if (a.structure() == Structure::none) throw InvalidInput("assignment carries no stratum, pair or cluster labels");
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < a.units(); ++i) groups[a.labels()[static_cast<std::size_t>(i)]].push_back(i);
  return groups;
}

StratifiedEstimate sre_estimate(const ObservedData& obs) {
  require_two_arms(obs, "stratified estimator");
  const Assignment& a = obs.assignment;
  if (a.structure() != Structure::stratum && a.structure() != Structure::pair) {
    throw InvalidInput("stratified estimator: assignment lacks stratum labels");
  }
  StratifiedEstimate out;
  const double n = obs.units();
  for (const auto& [label, units] : group_units(a)) {
    double s1 = 0.0, s0 = 0.0;
    int n1 = 0;
    for (int i : units) {
      if (a.arm(i) == kTreatedArm) {
        s1 += obs.y(i);
        ++n1;
      } else {
        s0 += obs.y(i);
      }
    }
    const int nk = static_cast<int>(units.size());
    if (n1 == 0 || n1 == nk) {
      throw InvalidInput("stratum " + std::to_string(label) + " needs at least one treated and one control unit");
    }
    const double tk = s1 / n1 - s0 / (nk - n1);
    out.strata.push_back(label);
    out.stratum_tau.push_back(tk);
    out.weights.push_back(nk / n);
    out.sizes.push_back(nk);
    out.treated.push_back(n1);
    out.tau += nk / n * tk;
  }
  return out;
}

PairedEstimate mpe_estimate(const ObservedData& obs) {
  require_two_arms(obs, "matched-pair estimator");
  require_structure(obs, Structure::pair, "matched-pair estimator");
  const Assignment& a = obs.assignment;
  PairedEstimate out;
  for (const auto& [label, units] : group_units(a)) {
    if (units.size() != 2 || a.arm(units[0]) == a.arm(units[1])) {
      throw InvalidInput("pair " + std::to_string(label) + " must hold exactly one treated and one control unit");
    }
    const int t = a.arm(units[0]) == kTreatedArm ? units[0] : units[1];
    const int c = t == units[0] ? units[1] : units[0];
    out.pairs.push_back(label);
    out.differences.push_back(obs.y(t) - obs.y(c));
    out.tau += out.differences.back();
  }
  out.tau /= static_cast<double>(out.differences.size());
  return out;
}

double cluster_estimate(const ObservedData& obs, ClusterMethod method) {
  require_two_arms(obs, "cluster estimator");
  require_structure(obs, Structure::cluster, "cluster estimator");
  const Assignment& a = obs.assignment;
  if (method == ClusterMethod::unit_average) {
    const auto groups = group_units(a);
    for (const auto& [label, units] : groups) {
      for (int i : units) {
        if (a.arm(i) != a.arm(units[0])) {
          throw InvalidInput("cluster " + std::to_string(label) + " mixes treatment arms");
        }
      }
    }
    return difference_in_means(obs);
  }
  double t1 = 0.0, t0 = 0.0;
  int m1 = 0, m0 = 0;
  for (const auto& [label, units] : group_units(a)) {
    double total = 0.0;
    for (int i : units) {
      if (a.arm(i) != a.arm(units[0])) throw InvalidInput("cluster " + std::to_string(label) + " mixes treatment arms");
      total += obs.y(i);
    }
    if (a.arm(units[0]) == kTreatedArm) {
      t1 += total;
      ++m1;
    } else {
      t0 += total;
      ++m0;
    }
  }
  if (m1 == 0 || m0 == 0) throw InvalidInput("cluster estimator needs treated and control clusters");
  const double m = m1 + m0;
  return m / obs.units() * (t1 / m1 - t0 / m0);
}

}  // namespace randinf
