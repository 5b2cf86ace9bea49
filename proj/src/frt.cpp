#include "randinf/frt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "randinf/designs.hpp"
#include "randinf/errors.hpp"

namespace randinf {
namespace {

constexpr double kExactCap = 1e6;

struct Imputed {
  VectorXd y0;
  VectorXd effect;
  double mean_effect = 0.0;
  int n1 = 0;
  int n0 = 0;
};

double diff_stat(const Imputed& s, const std::vector<char>& treated, double* vhat) {
  const Eigen::Index n = s.y0.size();
  double s1 = 0.0, s0 = 0.0, q1 = 0.0, q0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (treated[static_cast<std::size_t>(i)]) {
      const double y = s.y0(i) + s.effect(i);
      s1 += y;
      q1 += y * y;
    } else {
      s0 += s.y0(i);
      q0 += s.y0(i) * s.y0(i);
    }
  }
  const double m1 = s1 / s.n1, m0 = s0 / s.n0;
  if (vhat != nullptr) {
    const double v1 = s.n1 > 1 ? std::max(0.0, (q1 - s.n1 * m1 * m1) / (s.n1 - 1)) : 0.0;
    const double v0 = s.n0 > 1 ? std::max(0.0, (q0 - s.n0 * m0 * m0) / (s.n0 - 1)) : 0.0;
    *vhat = v1 / s.n1 + v0 / s.n0;
  }
  return m1 - m0 - s.mean_effect;
}

double statistic(const Imputed& s, const std::vector<char>& treated, bool studentize) {
  if (!studentize) return diff_stat(s, treated, nullptr);
  double v = 0.0;
  const double t = diff_stat(s, treated, &v);
  if (v > 0.0) return t / std::sqrt(v);
  if (t == 0.0) return 0.0;
  return t > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

bool as_extreme(double t, double observed, Sidedness sides) {
  const double tol = 1e-12 * std::max(1.0, std::fabs(observed));
  switch (sides) {
    case Sidedness::two_sided:
      return std::fabs(t) >= std::fabs(observed) - tol;
    case Sidedness::greater:
      return t >= observed - tol;
    case Sidedness::less:
      return t <= observed + tol;
  }
  return false;
}

}  // namespace

FrtResult frt(const ObservedData& obs, const FrtSpec& spec, RngSeed seed) {
  const Assignment& a = obs.assignment;
  if (a.arm_count() != 2) throw InvalidInput("randomization test is defined for two arms");
  const int n = obs.units();
  Imputed s;
  s.n1 = a.count(kTreatedArm);
  s.n0 = a.count(kControlArm);
  if (s.n1 < 1 || s.n0 < 1) throw InvalidInput("randomization test needs both arms nonempty");
  s.effect = spec.effect.size() == 0 ? VectorXd::Zero(n) : spec.effect;
  if (s.effect.size() != n) throw InvalidInput("sharp-null effect vector must have length N");
  if (!s.effect.allFinite()) throw InvalidInput("sharp-null effect vector must be finite");
  s.mean_effect = s.effect.mean();
  s.y0.resize(n);
  std::vector<char> treated(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    treated[static_cast<std::size_t>(i)] = a.arm(i) == kTreatedArm;
    s.y0(i) = obs.y(i) - (treated[static_cast<std::size_t>(i)] ? s.effect(i) : 0.0);
  }

  FrtResult out;
  bool studentize = spec.statistic == FrtStatistic::studentized;
  if (studentize) {
    double v = 0.0;
    diff_stat(s, treated, &v);
    if (!(v > 0.0)) {
      studentize = false;
      out.studentized_fallback = true;
      out.warnings.emplace_back("Neyman variance is zero at the observed assignment; using the difference in means");
    }
  }
  out.observed = statistic(s, treated, studentize);

  std::size_t extreme = 0;
  if (spec.mode == FrtMode::exact) {
    const int counts[2] = {s.n0, s.n1};
    const double support = cre_support_size(counts);
    if (support > kExactCap) {
      throw Infeasible("exact randomization test: C(N, N_1) = " + std::to_string(support) +
                       " exceeds 10^6; use Monte Carlo mode");
    }
    std::vector<char> z(static_cast<std::size_t>(n), 0);
    std::fill(z.end() - s.n1, z.end(), 1);
    out.reference.reserve(static_cast<std::size_t>(support));
    do {
      const double t = statistic(s, z, studentize);
      out.reference.push_back(t);
      extreme += as_extreme(t, out.observed, spec.sides);
    } while (std::next_permutation(z.begin(), z.end()));
    out.p_value = static_cast<double>(extreme) / static_cast<double>(out.reference.size());
  } else {
    if (spec.resamples < 1) throw InvalidInput("Monte Carlo randomization test needs R >= 1");
    Rng rng(seed);
    std::vector<char> z = treated;
    out.reference.reserve(spec.resamples);
    for (std::size_t r = 0; r < spec.resamples; ++r) {
      rng.shuffle(std::span<char>(z));
      const double t = statistic(s, z, studentize);
      out.reference.push_back(t);
      extreme += as_extreme(t, out.observed, spec.sides);
    }
    out.p_value = (1.0 + static_cast<double>(extreme)) / (1.0 + static_cast<double>(spec.resamples));
  }
  return out;
}

}  // namespace randinf
