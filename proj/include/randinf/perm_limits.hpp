#pragma once

// Linear permutational statistics Gamma = sum_i M(i, pi(i)) over a uniform
// random permutation pi: centering, exact moments, CLT diagnostics,
// normalization, and constant-free Berry-Esseen magnitudes.

#include <cstddef>
#include <string>
#include <vector>

#include "randinf/rng.hpp"
#include "randinf/science.hpp"

namespace randinf {

class PermKernel {
 public:
  // N x N, N >= 2, finite entries.
  explicit PermKernel(MatrixXd m);

  int units() const { return static_cast<int>(m_.rows()); }
  const MatrixXd& matrix() const { return m_; }

 private:
  MatrixXd m_;
};

class MultiKernel {
 public:
  explicit MultiKernel(std::vector<MatrixXd> ms);

  int units() const { return static_cast<int>(ms_.front().rows()); }
  int dims() const { return static_cast<int>(ms_.size()); }
  const MatrixXd& operator[](int h) const { return ms_[static_cast<std::size_t>(h)]; }
  const std::vector<MatrixXd>& matrices() const { return ms_; }

 private:
  std::vector<MatrixXd> ms_;
};

// M(i,j) - M(i,+)/N - M(+,j)/N + M(+,+)/N^2.
MatrixXd center_kernel(const MatrixXd& m);

struct PermMoments {
  double mean = 0.0;
  double variance = 0.0;
};

PermMoments perm_stat_moments(const PermKernel& k);

struct MultiMoments {
  VectorXd mean;
  MatrixXd covariance;
};

MultiMoments perm_stat_moments(const MultiKernel& k);

// Exact moments by walking all N! permutations; N <= 7.
PermMoments enumerate_perm_moments(const PermKernel& k);

// Gamma for the permutation pi (pi[i] is the column paired with row i).
double perm_statistic(const PermKernel& k, const std::vector<int>& pi);

// M(i,j) = a(i) b(j) with b(j) = 1/N_1 for j < N_1, else 0: Gamma is the
// sample mean of a simple random sample of size N_1.
PermKernel build_srs_kernel(const VectorXd& scores, int treated);

inline const std::vector<double> kDefaultEpsGrid{0.05, 0.1, 0.2, 0.5, 1.0};

struct CltReport {
  double variance = 0.0;
  std::vector<double> eps;
  std::vector<double> lindeberg;  // per eps, in [0, 1]
  double hoeffding3 = 0.0;
  double hoeffding4 = 0.0;
  double max_ratio = 0.0;
};

// Degenerate variance throws Infeasible.
CltReport clt_condition_report(const PermKernel& k, const std::vector<double>& eps = kDefaultEpsGrid);
std::vector<CltReport> clt_condition_report(const MultiKernel& k, const std::vector<double>& eps = kDefaultEpsGrid);

// Centered and scaled so that sum M^2 = N - 1.
PermKernel normalize_kernel(const PermKernel& k);
// Centered, then mixed by Var[Gamma]^{-1/2}: per-coordinate sum of squares
// N - 1 and zero cross inner products. Singular covariance throws Infeasible.
MultiKernel normalize_kernel(const MultiKernel& k);

// Max violation of the centering, unit-scale and orthogonality constraints,
// relative to N - 1.
double normalization_error(const PermKernel& k);
double normalization_error(const MultiKernel& k);

// N^{-1} sum |M|^3. The universal constant is not included. Unnormalized
// input throws InvalidInput unless auto_normalize is set.
double bolthausen_bound(const PermKernel& k, bool auto_normalize = false);

// N^{-1} sum_{ij} (sum_h M_h(i,j)^2)^{3/2}, without the dimension constant.
double multivariate_bound(const MultiKernel& k, bool auto_normalize = false);

// Conjectured form: H^{1/4} times multivariate_bound. Unproven.
double multivariate_bound_conjectural(const MultiKernel& k, bool auto_normalize = false);

// max_{q,i} |Y_i(q) - Ybar(q)| / min_q S(q,q)^{1/2} * sqrt(K^2 / N) for a
// 2^K table; the absolute constant and the contrast-dependent constant are
// not included. The contrast only fixes Q.
double factorial_beb_magnitude(const ScienceTable& table, const ContrastMatrix& contrast);

// (K+1)^{1/4} / sqrt(N r_1 r_0) * N^{-1} sum ||S_u^{-1}(u_i - ubar)||^3 with
// u_i = (r_0 Y_i(1) + r_1 Y_i(0), X_i')' and S_u^2 the (N - 1)-divisor covariance.
double gamma_N(const ScienceTable& table, const CovariateMatrix& x, double r1);

struct RemBebQuantities {
  double gamma = 0.0;
  double acceptance = 0.0;      // P(chi2_K <= a)
  double ratio = 0.0;           // acceptance / gamma^{1/3}
};

RemBebQuantities rem_beb_quantities(const ScienceTable& table, const CovariateMatrix& x, int treated,
                                    double threshold);

struct KolmogorovEstimate {
  double distance = 0.0;
  std::size_t draws = 0;
  double mc_error = 0.0;  // 0.5 / sqrt(R), pointwise binomial bound
};

// Standardized Gamma over R random permutations against N(0, 1). Draws are
// generated in fixed blocks with their own streams, so the result does not
// depend on `workers`. R < 100 throws InvalidInput.
KolmogorovEstimate empirical_kolmogorov(const PermKernel& k, std::size_t draws, RngSeed seed, int workers = 1);

// Standardized Gamma draws, the sample behind empirical_kolmogorov.
std::vector<double> sample_standardized(const PermKernel& k, std::size_t draws, RngSeed seed, int workers = 1);

// Dense numeric CSV, no header, square.
MatrixXd load_kernel_csv(const std::string& path);

// Families used by the rate diagnostics.
// Scores 1{i <= N/10}, sample size N/5.
PermKernel bounded_two_point_kernel(int n);
// Scores e_1, sample size N/2.
PermKernel spiked_kernel(int n);

}  // namespace randinf
