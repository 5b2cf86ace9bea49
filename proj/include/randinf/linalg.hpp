#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace randinf::linalg {

// Eigenvalue ratio lambda_max / lambda_min of a symmetric PSD matrix
// (infinity when lambda_min <= 0).
double condition_number(const Eigen::MatrixXd& sym);

// Throws Infeasible naming `what` and the dominant loadings of the
// near-null direction when the condition number reaches `limit`.
void require_well_conditioned(const Eigen::MatrixXd& sym, std::string_view what, double limit = 1e12);

// Inverse principal square root via the symmetric eigendecomposition, with
// eigenvalues floored at 1e-12 * trace.
Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& sym);

struct LeastSquaresFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  Eigen::VectorXd leverages;
  Eigen::MatrixXd g;  // D (D'D)^{-1}

  // (D'D)^{-1} D' diag(w) D (D'D)^{-1}
  Eigen::MatrixXd sandwich(const Eigen::VectorXd& w) const { return g.transpose() * w.asDiagonal() * g; }
  Eigen::MatrixXd hc0() const;
  Eigen::MatrixXd hc2() const;
};

// Column-pivoted QR. Throws Infeasible naming `what` when D is rank deficient.
LeastSquaresFit least_squares(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, std::string_view what);

}  // namespace randinf::linalg
