#include <algorithm>
#include <cmath>

#include "randinf/simd/kernels.hpp"

namespace randinf::simd {
namespace {

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

double cross_dev(const double* x, double mx, const double* y, double my, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (x[i] - mx) * (y[i] - my);
  return s;
}

double sum_abs_cubed(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::fabs(x[i]);
    s += a * a * a;
  }
  return s;
}

double sum_pow(const double* x, std::size_t n, int r) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = x[i];
    for (int k = 1; k < r; ++k) p *= x[i];
    s += p;
  }
  return s;
}

double sum_sq_above(const double* x, std::size_t n, double threshold) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(x[i]) > threshold) s += x[i] * x[i];
  }
  return s;
}

double max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

void center(const double* x, const double* row_shift, double shift, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - row_shift[i] - shift;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_squares(const double* x, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i] * x[i];
}

double sum_pow_three_halves(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * std::sqrt(x[i]);
  return s;
}

double gather_sum(const double* m, std::size_t ld, const std::int32_t* cols, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += m[i + static_cast<std::size_t>(cols[i]) * ld];
  return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Backend::scalar, sum,           dot,    sum_sq_dev, cross_dev,   sum_abs_cubed,        sum_pow,
      sum_sq_above,    max_abs,       center, axpy,       add_squares, sum_pow_three_halves, gather_sum,
  };
  return table;
}

}  // namespace randinf::simd
