#include "randinf/distributions.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "randinf/errors.hpp"

namespace randinf::dist {

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_two_sided_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), alpha / 2.0));
}

double chi_squared_cdf(double k, double x) {
  if (std::isinf(x)) return 1.0;
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(k), x);
}

double chi_squared_quantile(double k, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("chi_squared_quantile: p must lie in (0, 1)");
  if (!(k >= 1.0)) throw InvalidInput("chi_squared_quantile: degrees of freedom must be >= 1");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(k), p);
}

double kolmogorov_to_normal(std::span<const double> sample) {
  if (sample.empty()) throw InvalidInput("kolmogorov_to_normal: empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double kolmogorov_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("kolmogorov_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double lower_empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInput("lower_empirical_quantile: empty sample");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("lower_empirical_quantile: p must lie in (0, 1]");
  const auto n = values.size();
  auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end());
  return values[k - 1];
}

}  // namespace randinf::dist
