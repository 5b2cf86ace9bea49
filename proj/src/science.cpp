#include "randinf/science.hpp"

#include <cmath>
#include <string>

#include "randinf/errors.hpp"
#include "randinf/simd/kernels.hpp"

namespace randinf {
namespace {

std::span<const double> column(const MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

}  // namespace

int arm_from_indicator(int z) {
  if (z != 0 && z != 1) throw InvalidInput("treatment indicator must be 0 or 1, got " + std::to_string(z));
  return z + 1;
}

ScienceTable::ScienceTable(MatrixXd outcomes) : y_(std::move(outcomes)) {
  if (y_.rows() < 2 || y_.cols() < 2) throw InvalidInput("science table needs N >= 2 units and Q >= 2 arms");
  if (!y_.allFinite()) throw InvalidInput("science table contains non-finite potential outcomes");
}

ScienceTable ScienceTable::two_arm(const VectorXd& control, const VectorXd& treated) {
  if (control.size() != treated.size()) throw InvalidInput("two_arm: control and treated lengths differ");
  MatrixXd y(control.size(), 2);
  y.col(0) = control;
  y.col(1) = treated;
  return ScienceTable(std::move(y));
}

ContrastMatrix::ContrastMatrix(MatrixXd f) : f_(std::move(f)) {
  if (f_.rows() < 2 || f_.cols() < 1) throw InvalidInput("contrast matrix needs Q >= 2 rows and H >= 1 columns");
  if (!f_.allFinite()) throw InvalidInput("contrast matrix contains non-finite entries");
  const double scale = f_.cwiseAbs().maxCoeff();
  const VectorXd sums = f_.colwise().sum().transpose();
  if (sums.cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0)) {
    throw InvalidInput("contrast matrix columns must sum to zero");
  }
  Eigen::JacobiSVD<MatrixXd> svd(f_);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() < f_.cols() || sv(sv.size() - 1) <= 1e-10 * sv(0)) {
    throw InvalidInput("contrast matrix must have full column rank");
  }
}

ContrastMatrix ContrastMatrix::treatment_control() {
  MatrixXd f(2, 1);
  f << -1.0, 1.0;
  return ContrastMatrix(std::move(f));
}

CovariateMatrix::CovariateMatrix(MatrixXd x) : x_(std::move(x)) {
  if (x_.rows() < 1 || x_.cols() < 1) throw InvalidInput("covariate matrix needs K >= 1 columns");
  if (!x_.allFinite()) throw InvalidInput("covariate matrix contains non-finite entries");
  means_.resize(x_.cols());
  for (Eigen::Index k = 0; k < x_.cols(); ++k) means_(k) = simd::mean(column(x_, k));
}

CovariateMatrix CovariateMatrix::centered() const {
  CovariateMatrix out = *this;
  if (centered_) return out;
  out.x_.rowwise() -= means_.transpose();
  out.centered_ = true;
  return out;
}

MatrixXd CovariateMatrix::covariance() const {
  const Eigen::Index k = x_.cols();
  const double denom = static_cast<double>(x_.rows() - 1);
  if (denom <= 0) throw InvalidInput("covariance needs at least two units");
  VectorXd mu = centered_ ? VectorXd::Zero(k) : means_;
  if (centered_) {
    for (Eigen::Index j = 0; j < k; ++j) mu(j) = simd::mean(column(x_, j));
  }
  MatrixXd s(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      s(a, b) = s(b, a) = simd::cross_dev(column(x_, a), mu(a), column(x_, b), mu(b)) / denom;
    }
  }
  return s;
}

Assignment::Assignment(std::vector<int> arms, int arm_count, Structure kind, std::vector<int> labels)
    : z_(std::move(arms)), counts_(static_cast<std::size_t>(std::max(arm_count, 0)), 0), kind_(kind),
      labels_(std::move(labels)) {
  if (arm_count < 2) throw InvalidInput("assignment needs at least two arms");
  for (int q : z_) {
    if (q < 1 || q > arm_count) {
      throw InvalidInput("arm label " + std::to_string(q) + " outside 1.." + std::to_string(arm_count));
    }
    ++counts_[static_cast<std::size_t>(q - 1)];
  }
  if (kind_ == Structure::none) {
    if (!labels_.empty()) throw InvalidInput("structure labels given without a structure kind");
  } else if (labels_.size() != z_.size()) {
    throw InvalidInput("structure labels must cover every unit");
  }
}

Assignment Assignment::with_structure(Structure kind, std::vector<int> labels) const {
  return Assignment(z_, arm_count(), kind, std::move(labels));
}

ObservedData::ObservedData(VectorXd outcomes, Assignment a, std::optional<CovariateMatrix> x)
    : y(std::move(outcomes)), assignment(std::move(a)), covariates(std::move(x)) {
  if (y.size() != assignment.units()) throw InvalidInput("outcome and assignment lengths differ");
  if (!y.allFinite()) throw InvalidInput("observed outcomes must be finite");
  if (covariates && covariates->units() != units()) throw InvalidInput("covariate rows differ from unit count");
}

ObservedData observe(const ScienceTable& table, const Assignment& a) {
  if (a.units() != table.units() || a.arm_count() != table.arms()) {
    throw InvalidInput("assignment dimensions do not match the science table");
  }
  VectorXd y(table.units());
  for (int i = 0; i < table.units(); ++i) y(i) = table.outcome(i, a.arm(i));
  return ObservedData(std::move(y), a);
}

FpMoments fp_moments(const ScienceTable& table, const ContrastMatrix& contrast) {
  if (contrast.arms() != table.arms()) throw InvalidInput("contrast rows differ from arm count");
  const MatrixXd& y = table.outcomes();
  const int q = table.arms();
  FpMoments m;
  m.means.resize(q);
  for (int a = 0; a < q; ++a) m.means(a) = simd::mean(column(y, a));
  m.covariance.resize(q, q);
  const double denom = table.units() - 1.0;
  for (int a = 0; a < q; ++a) {
    for (int b = a; b < q; ++b) {
      m.covariance(a, b) = m.covariance(b, a) =
          simd::cross_dev(column(y, a), m.means(a), column(y, b), m.means(b)) / denom;
    }
  }
  const MatrixXd& f = contrast.matrix();
  m.effects = f.transpose() * m.means;
  m.effect_covariance = f.transpose() * m.covariance * f;
  return m;
}

ContrastMatrix factorial_contrasts(int factors, FactorialEffects which) {
  if (factors < 1 || factors > 20) throw InvalidInput("factorial_contrasts: K must lie in [1, 20]");
  const Eigen::Index q = Eigen::Index{1} << factors;
  const int h = which == FactorialEffects::main ? factors : factors * (factors + 1) / 2;
  if (static_cast<double>(q) * h > static_cast<double>(1 << 27)) {
    throw Infeasible("factorial_contrasts: Q x H exceeds the memory guard");
  }
  const double scale = 2.0 / static_cast<double>(q);
  MatrixXd f(q, h);
  for (Eigen::Index row = 0; row < q; ++row) {
    auto sign = [row](int k) { return ((row >> k) & 1) != 0 ? 1.0 : -1.0; };
    int col = 0;
    for (int k = 0; k < factors; ++k) f(row, col++) = sign(k) * scale;
    if (which == FactorialEffects::main_and_two_way) {
      for (int k = 0; k < factors; ++k) {
        for (int l = k + 1; l < factors; ++l) f(row, col++) = sign(k) * sign(l) * scale;
      }
    }
  }
  return ContrastMatrix(std::move(f));
}

}  // namespace randinf
