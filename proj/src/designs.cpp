#include "randinf/designs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "randinf/distributions.hpp"
#include "randinf/linalg.hpp"

namespace randinf {
namespace {

constexpr double kEnumerationCap = 1e6;

void check_counts(std::span<const int> counts) {
  if (counts.size() < 2) throw InvalidInput("CRE needs at least two arms");
  long long total = 0;
  for (int c : counts) {
    if (c < 1) throw InvalidInput("CRE arm counts must be positive");
    total += c;
    if (total > std::numeric_limits<int>::max() / 2) throw InvalidInput("CRE unit count overflows");
  }
}

std::vector<int> label_multiset(std::span<const int> counts) {
  std::vector<int> labels;
  for (std::size_t q = 0; q < counts.size(); ++q) labels.insert(labels.end(), static_cast<std::size_t>(counts[q]), static_cast<int>(q) + 1);
  return labels;
}

void check_two_arm_counts(int treated, int control) {
  if (treated < 1 || control < 1) throw InvalidInput("two-arm design needs N_1 >= 1 and N_0 >= 1");
}

void check_sre(const SreSpec& spec) {
  if (spec.strata.empty()) throw InvalidInput("SRE needs at least one stratum");
  for (std::size_t k = 0; k < spec.strata.size(); ++k) {
    const auto& s = spec.strata[k];
    if (s.treated < 1 || s.treated >= s.size) {
      throw InvalidInput("stratum " + std::to_string(k + 1) + ": treated count must lie in [1, size - 1]");
    }
  }
}

void check_cluster(int clusters, int treated, std::span<const int> sizes) {
  if (treated < 1 || treated >= clusters) throw InvalidInput("cluster design needs 1 <= M_1 < M");
  if (sizes.size() != static_cast<std::size_t>(clusters)) throw InvalidInput("cluster sizes must list every cluster");
  for (int n : sizes) {
    if (n < 1) throw InvalidInput("cluster sizes must be positive");
  }
}

}  // namespace

void validate(const DesignSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CreSpec>) {
          check_counts(s.counts);
        } else if constexpr (std::is_same_v<T, RemSpec>) {
          check_two_arm_counts(s.treated, s.control);
          if (!(s.threshold > 0.0)) throw InvalidInput("ReM threshold must be positive");
          if (s.max_draws < 1) throw InvalidInput("ReM max_draws must be >= 1");
        } else if constexpr (std::is_same_v<T, SreSpec>) {
          check_sre(s);
        } else if constexpr (std::is_same_v<T, MpeSpec>) {
          if (s.pairs < 1) throw InvalidInput("MPE needs at least one pair");
        } else {
          check_cluster(s.clusters, s.treated, s.sizes);
        }
      },
      spec);
}

int design_units(const DesignSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CreSpec>) {
          return std::accumulate(s.counts.begin(), s.counts.end(), 0);
        } else if constexpr (std::is_same_v<T, RemSpec>) {
          return s.treated + s.control;
        } else if constexpr (std::is_same_v<T, SreSpec>) {
          int n = 0;
          for (const auto& st : s.strata) n += st.size;
          return n;
        } else if constexpr (std::is_same_v<T, MpeSpec>) {
          return 2 * s.pairs;
        } else {
          return std::accumulate(s.sizes.begin(), s.sizes.end(), 0);
        }
      },
      spec);
}

double cre_support_size(std::span<const int> counts) {
  double log_size = 0.0;
  int total = 0;
  for (int c : counts) {
    total += c;
    log_size -= std::lgamma(c + 1.0);
  }
  log_size += std::lgamma(total + 1.0);
  return std::round(std::exp(log_size));
}

Assignment draw_cre(std::span<const int> counts, Rng& rng) {
  check_counts(counts);
  std::vector<int> labels = label_multiset(counts);
  rng.shuffle(std::span<int>(labels));
  return Assignment(std::move(labels), static_cast<int>(counts.size()));
}

Assignment draw_cre(std::span<const int> counts, RngSeed seed) {
  Rng rng(seed);
  return draw_cre(counts, rng);
}

std::vector<Assignment> enumerate_cre(std::span<const int> counts) {
  check_counts(counts);
  const double size = cre_support_size(counts);
  if (size > kEnumerationCap) {
    throw Infeasible("enumerate_cre: support of " + std::to_string(size) + " assignments exceeds 10^6");
  }
  std::vector<int> labels = label_multiset(counts);
  std::vector<Assignment> out;
  out.reserve(static_cast<std::size_t>(size));
  do {
    out.emplace_back(labels, static_cast<int>(counts.size()));
  } while (std::next_permutation(labels.begin(), labels.end()));
  return out;
}

BalanceCriterion::BalanceCriterion(const CovariateMatrix& x) : xc_(x.centered().values()) {
  if (xc_.rows() < xc_.cols() + 1) throw InvalidInput("Mahalanobis balance needs N > K");
  const MatrixXd s = x.covariance();
  linalg::require_well_conditioned(s, "covariate covariance S_X^2");
  chol_.compute(s);
}

double BalanceCriterion::operator()(const Assignment& a) const {
  if (a.arm_count() != 2) throw InvalidInput("Mahalanobis balance is defined for two arms");
  if (a.units() != units()) throw InvalidInput("assignment length differs from covariate rows");
  const int n1 = a.count(kTreatedArm), n0 = a.count(kControlArm);
  if (n1 < 1 || n0 < 1) throw InvalidInput("Mahalanobis balance needs both arms nonempty");
  // With centered covariates the control sum is minus the treated sum, so
  // tau_X = T * N / (N_1 N_0) for the treated column sums T.
  VectorXd t = VectorXd::Zero(xc_.cols());
  for (int i = 0; i < a.units(); ++i) {
    if (a.arm(i) == kTreatedArm) t += xc_.row(i).transpose();
  }
  const double n = static_cast<double>(a.units());
  const double m = n / (static_cast<double>(n1) * n0) * t.dot(chol_.solve(t));
  return std::max(m, 0.0);
}

double mahalanobis(const CovariateMatrix& x, const Assignment& a) { return BalanceCriterion(x)(a); }

RemExhausted::RemExhausted(double best_distance, std::size_t draws)
    : Infeasible("rerandomization exhausted " + std::to_string(draws) +
                 " draws without meeting the threshold; best distance " + std::to_string(best_distance)),
      best_(best_distance),
      draws_(draws) {}

RemDraw draw_rem(const BalanceCriterion& criterion, const RemSpec& spec, Rng& rng) {
  validate(spec);
  if (spec.treated + spec.control != criterion.units()) {
    throw InvalidInput("ReM arm counts do not sum to the covariate row count");
  }
  const int counts[2] = {spec.control, spec.treated};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t draw = 1; draw <= spec.max_draws; ++draw) {
    Assignment a = draw_cre(counts, rng);
    const double m = criterion(a);
    if (m <= spec.threshold) return RemDraw{std::move(a), draw, m};
    best = std::min(best, m);
  }
  throw RemExhausted(best, spec.max_draws);
}

RemDraw draw_rem(const CovariateMatrix& x, const RemSpec& spec, RngSeed seed) {
  Rng rng(seed);
  return draw_rem(BalanceCriterion(x), spec, rng);
}

double threshold_from_acceptance(int k, double p) {
  if (k < 1) throw InvalidInput("threshold_from_acceptance: K must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("threshold_from_acceptance: p must lie in (0, 1)");
  return dist::chi_squared_quantile(k, p);
}

double acceptance_probability(int k, double threshold) {
  if (k < 1) throw InvalidInput("acceptance_probability: K must be >= 1");
  return dist::chi_squared_cdf(k, threshold);
}

Assignment draw_sre(const SreSpec& spec, Rng& rng) {
  check_sre(spec);
  std::vector<int> z, labels;
  for (std::size_t k = 0; k < spec.strata.size(); ++k) {
    const auto& s = spec.strata[k];
    const int counts[2] = {s.size - s.treated, s.treated};
    const Assignment block = draw_cre(counts, rng);
    z.insert(z.end(), block.arms().begin(), block.arms().end());
    labels.insert(labels.end(), static_cast<std::size_t>(s.size), static_cast<int>(k) + 1);
  }
  return Assignment(std::move(z), 2, Structure::stratum, std::move(labels));
}

Assignment draw_sre(const SreSpec& spec, RngSeed seed) {
  Rng rng(seed);
  return draw_sre(spec, rng);
}

Assignment draw_mpe(int pairs, Rng& rng) {
  if (pairs < 1) throw InvalidInput("MPE needs at least one pair");
  SreSpec spec{std::vector<StratumSpec>(static_cast<std::size_t>(pairs), StratumSpec{2, 1})};
  const Assignment a = draw_sre(spec, rng);
  return a.with_structure(Structure::pair, a.labels());
}

Assignment draw_mpe(int pairs, RngSeed seed) {
  Rng rng(seed);
  return draw_mpe(pairs, rng);
}

Assignment draw_cluster(int clusters, int treated, std::span<const int> sizes, Rng& rng) {
  check_cluster(clusters, treated, sizes);
  const int counts[2] = {clusters - treated, treated};
  const Assignment level = draw_cre(counts, rng);
  std::vector<int> z, labels;
  for (int c = 0; c < clusters; ++c) {
    z.insert(z.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(c)]), level.arm(c));
    labels.insert(labels.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(c)]), c + 1);
  }
  return Assignment(std::move(z), 2, Structure::cluster, std::move(labels));
}

Assignment draw_cluster(int clusters, int treated, std::span<const int> sizes, RngSeed seed) {
  Rng rng(seed);
  return draw_cluster(clusters, treated, sizes, rng);
}

DesignDraw draw(const DesignSpec& spec, Rng& rng, const CovariateMatrix* covariates) {
  validate(spec);
  return std::visit(
      [&](const auto& s) -> DesignDraw {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CreSpec>) {
          return {draw_cre(s.counts, rng), 1};
        } else if constexpr (std::is_same_v<T, RemSpec>) {
          if (covariates == nullptr) throw InvalidInput("ReM requires a covariate matrix");
          RemDraw r = draw_rem(BalanceCriterion(*covariates), s, rng);
          return {std::move(r.assignment), r.draws_used};
        } else if constexpr (std::is_same_v<T, SreSpec>) {
          return {draw_sre(s, rng), 1};
        } else if constexpr (std::is_same_v<T, MpeSpec>) {
          return {draw_mpe(s.pairs, rng), 1};
        } else {
          return {draw_cluster(s.clusters, s.treated, s.sizes, rng), 1};
        }
      },
      spec);
}

}  // namespace randinf
