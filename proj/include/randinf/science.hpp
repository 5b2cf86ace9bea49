#pragma once

// Potential-outcome tables, contrasts, assignments and the finite-population
// moments everything else is built on.
//
// Arms are labelled 1..Q throughout. The two-arm layer uses arm 1 for control
// and arm 2 for treatment, so the treatment-control contrast is (-1, 1)'.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace randinf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kControlArm = 1;
inline constexpr int kTreatedArm = 2;

// {0, 1} treatment indicator -> arm label.
int arm_from_indicator(int z);

// N x Q matrix of fixed potential outcomes. Immutable.
class ScienceTable {
 public:
  explicit ScienceTable(MatrixXd outcomes);
  static ScienceTable two_arm(const VectorXd& control, const VectorXd& treated);

  int units() const { return static_cast<int>(y_.rows()); }
  int arms() const { return static_cast<int>(y_.cols()); }
  double outcome(int unit, int arm) const { return y_(unit, arm - 1); }
  std::span<const double> arm_outcomes(int arm) const {
    return {y_.col(arm - 1).data(), static_cast<std::size_t>(y_.rows())};
  }
  const MatrixXd& outcomes() const { return y_; }

 private:
  MatrixXd y_;
};

// Q x H contrast matrix with zero column sums and full column rank.
class ContrastMatrix {
 public:
  explicit ContrastMatrix(MatrixXd f);
  static ContrastMatrix treatment_control();

  int arms() const { return static_cast<int>(f_.rows()); }
  int effects() const { return static_cast<int>(f_.cols()); }
  const MatrixXd& matrix() const { return f_; }

 private:
  MatrixXd f_;
};

class CovariateMatrix {
 public:
  explicit CovariateMatrix(MatrixXd x);

  // Copy with column means removed; means() keeps the original means.
  CovariateMatrix centered() const;

  int units() const { return static_cast<int>(x_.rows()); }
  int dims() const { return static_cast<int>(x_.cols()); }
  bool is_centered() const { return centered_; }
  const MatrixXd& values() const { return x_; }
  const VectorXd& means() const { return means_; }

  // Finite-population covariance with the N-1 divisor.
  MatrixXd covariance() const;

 private:
  MatrixXd x_;
  VectorXd means_;
  bool centered_ = false;
};

enum class Structure { none, stratum, pair, cluster };

class Assignment {
 public:
  Assignment(std::vector<int> arms, int arm_count, Structure kind = Structure::none, std::vector<int> labels = {});

  int units() const { return static_cast<int>(z_.size()); }
  int arm_count() const { return static_cast<int>(counts_.size()); }
  int arm(int unit) const { return z_[static_cast<std::size_t>(unit)]; }
  int count(int arm) const { return counts_[static_cast<std::size_t>(arm - 1)]; }
  const std::vector<int>& arms() const { return z_; }
  const std::vector<int>& counts() const { return counts_; }
  Structure structure() const { return kind_; }
  const std::vector<int>& labels() const { return labels_; }

  Assignment with_structure(Structure kind, std::vector<int> labels) const;

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<int> z_;
  std::vector<int> counts_;
  Structure kind_ = Structure::none;
  std::vector<int> labels_;
};

struct ObservedData {
  ObservedData(VectorXd outcomes, Assignment assignment, std::optional<CovariateMatrix> covariates = std::nullopt);

  VectorXd y;
  Assignment assignment;
  std::optional<CovariateMatrix> covariates;

  int units() const { return static_cast<int>(y.size()); }
};

ObservedData observe(const ScienceTable& table, const Assignment& assignment);

struct FpMoments {
  VectorXd means;       // Ybar(q)
  MatrixXd covariance;  // S, N-1 divisor
  VectorXd effects;     // tau = F' Ybar
  MatrixXd effect_covariance;  // F' S F
};

FpMoments fp_moments(const ScienceTable& table, const ContrastMatrix& contrast);

enum class FactorialEffects { main, main_and_two_way };

// Contrasts of a 2^K factorial; arm q corresponds to the binary expansion of
// q - 1 with factor k at bit k. Entries are +-(Q/2)^{-1}.
ContrastMatrix factorial_contrasts(int factors, FactorialEffects which);

}  // namespace randinf
