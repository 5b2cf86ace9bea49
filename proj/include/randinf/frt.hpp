#pragma once

// Fisher randomization tests of a sharp null Y_i(1) = Y_i(0) + effect_i,
// exact over the full CRE support or by Monte Carlo.

#include <cstddef>
#include <string>
#include <vector>

#include "randinf/rng.hpp"
#include "randinf/science.hpp"

namespace randinf {

enum class FrtStatistic { diff_in_means, studentized };
enum class FrtMode { exact, monte_carlo };
enum class Sidedness { two_sided, greater, less };

struct FrtSpec {
  FrtStatistic statistic = FrtStatistic::diff_in_means;
  FrtMode mode = FrtMode::exact;
  std::size_t resamples = 10000;  // Monte Carlo only
  Sidedness sides = Sidedness::two_sided;
  VectorXd effect;  // empty means the zero effect
};

struct FrtResult {
  double p_value = 1.0;
  double observed = 0.0;
  std::vector<double> reference;  // statistic under every reference assignment
  bool studentized_fallback = false;
  std::vector<std::string> warnings;
};

// Statistics are centered at the mean hypothesized effect, so the two-sided
// test compares |T| for any effect vector. Exact mode: p = #{T* >= T} / |Z|
// with the observed assignment in the reference set; Monte Carlo mode:
// p = (1 + #{T* >= T}) / (1 + R). Ties use a 1e-12 relative tolerance.
FrtResult frt(const ObservedData& obs, const FrtSpec& spec, RngSeed seed = {});

}  // namespace randinf
