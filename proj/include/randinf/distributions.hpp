#pragma once

#include <span>
#include <vector>

namespace randinf::dist {

double normal_cdf(double x);
double normal_quantile(double p);
// Upper alpha/2 quantile of N(0,1).
double normal_two_sided_critical(double alpha);

double chi_squared_cdf(double k, double x);
double chi_squared_quantile(double k, double p);

// sup_t |F_n(t) - Phi(t)| evaluated at the sample points.
double kolmogorov_to_normal(std::span<const double> sample);

// Two-sample sup_t |F_n(t) - G_m(t)|.
double kolmogorov_two_sample(std::span<const double> a, std::span<const double> b);

// Lower empirical quantile: the ceil(p * n)-th order statistic.
double lower_empirical_quantile(std::vector<double> values, double p);

}  // namespace randinf::dist
