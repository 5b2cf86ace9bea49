#pragma once

// Data-parallel reductions used by the moment, kernel and diagnostic code.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant compiled in its own translation unit. The active table is
// picked once at startup from CPUID; RANDINF_SIMD=scalar|avx2 overrides it.
// Vector variants reorder floating-point sums, so results agree with the
// scalar reference to rounding (not bitwise).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace randinf::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum (x - mean)^2
  double (*sum_sq_dev)(const double* x, std::size_t n, double mean);
  // sum (x - mx)(y - my)
  double (*cross_dev)(const double* x, double mx, const double* y, double my, std::size_t n);
  double (*sum_abs_cubed)(const double* x, std::size_t n);
  // signed sum x^r, 1 <= r <= 16
  double (*sum_pow)(const double* x, std::size_t n, int r);
  // sum x^2 over entries with |x| > threshold
  double (*sum_sq_above)(const double* x, std::size_t n, double threshold);
  double (*max_abs)(const double* x, std::size_t n);
  // out[i] = x[i] - row_shift[i] - shift
  void (*center)(const double* x, const double* row_shift, double shift, double* out, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // acc[i] += x[i]^2
  void (*add_squares)(const double* x, double* acc, std::size_t n);
  // sum x^(3/2) for x >= 0
  double (*sum_pow_three_halves)(const double* x, std::size_t n);
  // sum_i m[i + cols[i] * ld]; column-major gather along a permutation
  double (*gather_sum)(const double* m, std::size_t ld, const std::int32_t* cols, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

const KernelTable& active();

// Throws std::invalid_argument if the backend is unavailable.
void select(Backend backend);

Backend best_available();
std::string_view name(Backend backend);

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
double dot(std::span<const double> x, std::span<const double> y);
inline double sum_sq_dev(std::span<const double> x, double mean) {
  return active().sum_sq_dev(x.data(), x.size(), mean);
}
double cross_dev(std::span<const double> x, double mx, std::span<const double> y, double my);
inline double sum_abs_cubed(std::span<const double> x) { return active().sum_abs_cubed(x.data(), x.size()); }
double sum_pow(std::span<const double> x, int r);
inline double sum_sq_above(std::span<const double> x, double threshold) {
  return active().sum_sq_above(x.data(), x.size(), threshold);
}
inline double max_abs(std::span<const double> x) { return active().max_abs(x.data(), x.size()); }
void center(std::span<const double> x, std::span<const double> row_shift, double shift, std::span<double> out);
void axpy(double a, std::span<const double> x, std::span<double> y);
void add_squares(std::span<const double> x, std::span<double> acc);
inline double sum_pow_three_halves(std::span<const double> x) {
  return active().sum_pow_three_halves(x.data(), x.size());
}

inline double mean(std::span<const double> x) { return x.empty() ? 0.0 : sum(x) / static_cast<double>(x.size()); }

}  // namespace randinf::simd
