#include "randinf/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "randinf/errors.hpp"

namespace randinf::linalg {

double condition_number(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev(0), hi = ev(ev.size() - 1);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

void require_well_conditioned(const Eigen::MatrixXd& sym, std::string_view what, double limit) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const auto& ev = es.eigenvalues();
  const double lo = ev(0), hi = ev(ev.size() - 1);
  if (lo > 0.0 && hi / lo < limit) return;
  const Eigen::VectorXd v = es.eigenvectors().col(0);
  std::ostringstream msg;
  msg << what << " is singular or ill-conditioned (condition number "
      << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) << "); near-collinear combination:";
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (std::fabs(v(j)) > 0.1) msg << " column " << j + 1 << " (" << v(j) << ")";
  }
  throw Infeasible(msg.str());
}

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double floor = 1e-12 * std::max(sym.trace(), std::numeric_limits<double>::min());
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

LeastSquaresFit least_squares(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, std::string_view what) {
  using Eigen::MatrixXd;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(d);
  qr.setThreshold(1e-10);
  const Eigen::Index p = d.cols();
  if (d.rows() < p || qr.rank() < p) {
    throw Infeasible(std::string(what) + ": rank-deficient design (collinear covariates or too few units)");
  }
  LeastSquaresFit fit;
  fit.coef = qr.solve(y);
  fit.residuals = y - d * fit.coef;
  const MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const MatrixXd pr = qr.colsPermutation() * r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p, p));
  // W = D P R^{-1} has orthonormal columns spanning col(D).
  const MatrixXd w = d * pr;
  fit.leverages = w.rowwise().squaredNorm();
  fit.g = w * pr.transpose();
  return fit;
}

Eigen::MatrixXd LeastSquaresFit::hc0() const { return sandwich(residuals.array().square().matrix()); }

Eigen::MatrixXd LeastSquaresFit::hc2() const {
  Eigen::VectorXd w(residuals.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double denom = 1.0 - leverages(i);
    w(i) = denom > 1e-12 ? residuals(i) * residuals(i) / denom : std::numeric_limits<double>::infinity();
  }
  return sandwich(w);
}

}  // namespace randinf::linalg
