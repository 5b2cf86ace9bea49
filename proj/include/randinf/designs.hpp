#pragma once

// Assignment mechanisms: complete randomization, rerandomization with a
// Mahalanobis balance criterion, stratified, matched-pair and cluster designs.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "randinf/errors.hpp"
#include "randinf/rng.hpp"
#include "randinf/science.hpp"

namespace randinf {

struct CreSpec {
  std::vector<int> counts;  // N_1..N_Q
};

struct RemSpec {
  int treated = 0;
  int control = 0;
  double threshold = 0.0;  // a > 0; +inf accepts every draw
  std::size_t max_draws = 1'000'000;
};

struct StratumSpec {
  int size = 0;
  int treated = 0;
};

struct SreSpec {
  std::vector<StratumSpec> strata;
};

struct MpeSpec {
  int pairs = 0;
};

struct ClusterSpec {
  int clusters = 0;
  int treated = 0;
  std::vector<int> sizes;
};

using DesignSpec = std::variant<CreSpec, RemSpec, SreSpec, MpeSpec, ClusterSpec>;

void validate(const DesignSpec& spec);
int design_units(const DesignSpec& spec);

// Number of distinct CRE assignments, N! / (N_1! ... N_Q!), as a double.
double cre_support_size(std::span<const int> counts);

Assignment draw_cre(std::span<const int> counts, Rng& rng);
Assignment draw_cre(std::span<const int> counts, RngSeed seed);

// All CRE assignments in lexicographic order. Support capped at 10^6.
std::vector<Assignment> enumerate_cre(std::span<const int> counts);

// Mahalanobis distance of the covariate mean difference between arm 2
// (treated) and arm 1 (control), with the covariance factor cached so that
// repeated draws cost O(N_1 K).
class BalanceCriterion {
 public:
  explicit BalanceCriterion(const CovariateMatrix& x);

  double operator()(const Assignment& a) const;
  int dims() const { return static_cast<int>(xc_.cols()); }
  int units() const { return static_cast<int>(xc_.rows()); }

 private:
  MatrixXd xc_;
  Eigen::LLT<MatrixXd> chol_;
};

double mahalanobis(const CovariateMatrix& x, const Assignment& a);

struct RemDraw {
  Assignment assignment;
  std::size_t draws_used = 0;
  double distance = 0.0;
};

class RemExhausted : public Infeasible {
 public:
  RemExhausted(double best_distance, std::size_t draws);
  double best_distance() const { return best_; }
  std::size_t draws() const { return draws_; }

 private:
  double best_;
  std::size_t draws_;
};

RemDraw draw_rem(const BalanceCriterion& criterion, const RemSpec& spec, Rng& rng);
RemDraw draw_rem(const CovariateMatrix& x, const RemSpec& spec, RngSeed seed);

// Chi-square(K) quantile at p: the threshold whose asymptotic acceptance
// probability is p.
double threshold_from_acceptance(int k, double p);

// Asymptotic acceptance probability Pr(chi2_K <= a).
double acceptance_probability(int k, double threshold);

// Units are laid out stratum by stratum; labels are 1..K.
Assignment draw_sre(const SreSpec& spec, Rng& rng);
Assignment draw_sre(const SreSpec& spec, RngSeed seed);

// Pairs (2k-1, 2k) share label k; exactly one unit per pair is treated.
Assignment draw_mpe(int pairs, Rng& rng);
Assignment draw_mpe(int pairs, RngSeed seed);

// Units are laid out cluster by cluster; labels are 1..M.
Assignment draw_cluster(int clusters, int treated, std::span<const int> sizes, Rng& rng);
Assignment draw_cluster(int clusters, int treated, std::span<const int> sizes, RngSeed seed);

struct DesignDraw {
  Assignment assignment;
  std::size_t draws_used = 1;
};

// Dispatches on the spec; ReM requires covariates.
DesignDraw draw(const DesignSpec& spec, Rng& rng, const CovariateMatrix* covariates = nullptr);

}  // namespace randinf
