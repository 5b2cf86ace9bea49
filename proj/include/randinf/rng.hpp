#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace randinf {

struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Stream for replicate `index` under a base seed; independent of worker count.
RngSeed replicate_stream(std::uint64_t seed, std::uint64_t index);

class Rng {
 public:
  explicit Rng(RngSeed seed);

  std::size_t uniform_index(std::size_t n);  // uniform on {0, ..., n-1}
  double uniform01();
  double normal();

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace randinf
