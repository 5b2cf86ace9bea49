#include "randinf/perm_limits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "randinf/distributions.hpp"
#include "randinf/errors.hpp"
#include "randinf/linalg.hpp"
#include "randinf/simd/kernels.hpp"

namespace randinf {
namespace {

constexpr int kEnumerationMaxUnits = 7;
constexpr double kNormalizedTolerance = 1e-8;
constexpr std::size_t kBlockDraws = 4096;

std::span<const double> entries(const MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> entries(MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

void check_square(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw InvalidInput(std::string(what) + ": kernel must be square");
  if (m.rows() < 2) throw InvalidInput(std::string(what) + ": kernel needs N >= 2");
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": kernel entries must be finite");
}

double sum_squares(const MatrixXd& m) { return simd::dot(entries(m), entries(m)); }

// Sum of squares of a centered kernel, rejecting a vanishing variance.
double nondegenerate_sum_squares(const MatrixXd& centered, const MatrixXd& raw, const char* what) {
  const double ss = sum_squares(centered);
  const double scale = sum_squares(raw);
  if (!(ss > 1e-24 * scale) || ss <= 0.0) throw Infeasible(std::string(what) + ": permutation statistic has zero variance");
  return ss;
}

}  // namespace

PermKernel::PermKernel(MatrixXd m) : m_(std::move(m)) { check_square(m_, "PermKernel"); }

MultiKernel::MultiKernel(std::vector<MatrixXd> ms) : ms_(std::move(ms)) {
  if (ms_.empty()) throw InvalidInput("MultiKernel needs H >= 1");
  for (const auto& m : ms_) {
    check_square(m, "MultiKernel");
    if (m.rows() != ms_.front().rows()) throw InvalidInput("MultiKernel coordinates must share N");
  }
}

MatrixXd center_kernel(const MatrixXd& m) {
  const auto n = static_cast<double>(m.rows());
  const VectorXd row_means = m.rowwise().sum() / n;
  const VectorXd col_means = m.colwise().sum().transpose() / n;
  const double grand = col_means.sum() / n;
  MatrixXd out(m.rows(), m.cols());
  const auto rows = static_cast<std::size_t>(m.rows());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    simd::center({m.col(j).data(), rows}, {row_means.data(), rows}, col_means(j) - grand, {out.col(j).data(), rows});
  }
  return out;
}

PermMoments perm_stat_moments(const PermKernel& k) {
  const auto n = static_cast<double>(k.units());
  const MatrixXd c = center_kernel(k.matrix());
  return {simd::sum(entries(k.matrix())) / n, sum_squares(c) / (n - 1.0)};
}

MultiMoments perm_stat_moments(const MultiKernel& k) {
  const int h = k.dims();
  const auto n = static_cast<double>(k.units());
  std::vector<MatrixXd> c;
  MultiMoments out{VectorXd(h), MatrixXd(h, h)};
  for (int a = 0; a < h; ++a) {
    out.mean(a) = simd::sum(entries(k[a])) / n;
    c.push_back(center_kernel(k[a]));
  }
  for (int a = 0; a < h; ++a) {
    for (int b = 0; b <= a; ++b) {
      out.covariance(a, b) = out.covariance(b, a) =
          simd::dot(entries(c[static_cast<std::size_t>(a)]), entries(c[static_cast<std::size_t>(b)])) / (n - 1.0);
    }
  }
  return out;
}

double perm_statistic(const PermKernel& k, const std::vector<int>& pi) {
  if (pi.size() != static_cast<std::size_t>(k.units())) throw InvalidInput("permutation length differs from N");
  double g = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) g += k.matrix()(static_cast<Eigen::Index>(i), pi[i]);
  return g;
}

PermMoments enumerate_perm_moments(const PermKernel& k) {
  if (k.units() > kEnumerationMaxUnits) throw InvalidInput("permutation enumeration is limited to N <= 7");
  std::vector<int> pi(static_cast<std::size_t>(k.units()));
  std::iota(pi.begin(), pi.end(), 0);
  std::vector<double> values;
  do {
    values.push_back(perm_statistic(k, pi));
  } while (std::next_permutation(pi.begin(), pi.end()));
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, ss / static_cast<double>(values.size())};
}

PermKernel build_srs_kernel(const VectorXd& scores, int treated) {
  const auto n = static_cast<int>(scores.size());
  if (n < 2) throw InvalidInput("SRS kernel needs N >= 2");
  if (treated < 1 || treated >= n) throw InvalidInput("SRS kernel needs 1 <= N_1 < N");
  VectorXd b = VectorXd::Zero(n);
  b.head(treated).setConstant(1.0 / treated);
  return PermKernel(scores * b.transpose());
}

CltReport clt_condition_report(const PermKernel& k, const std::vector<double>& eps) {
  const MatrixXd c = center_kernel(k.matrix());
  const double ss = nondegenerate_sum_squares(c, k.matrix(), "clt_condition_report");
  const auto n = static_cast<double>(k.units());
  CltReport r;
  r.variance = ss / (n - 1.0);
  r.eps = eps;
  for (double e : eps) {
    if (!(e > 0.0)) throw InvalidInput("Lindeberg eps must be positive");
    r.lindeberg.push_back(simd::sum_sq_above(entries(c), e * std::sqrt(r.variance)) / ss);
  }
  const double mx = simd::max_abs(entries(c));
  r.max_ratio = mx * mx / (ss / n);
  r.hoeffding3 = std::pow(n, 0.5) * std::fabs(simd::sum_pow(entries(c), 3)) / std::pow(ss, 1.5);
  r.hoeffding4 = n * std::fabs(simd::sum_pow(entries(c), 4)) / (ss * ss);
  return r;
}

std::vector<CltReport> clt_condition_report(const MultiKernel& k, const std::vector<double>& eps) {
  std::vector<CltReport> out;
  for (const auto& m : k.matrices()) out.push_back(clt_condition_report(PermKernel(m), eps));
  return out;
}

PermKernel normalize_kernel(const PermKernel& k) {
  MatrixXd c = center_kernel(k.matrix());
  const double ss = nondegenerate_sum_squares(c, k.matrix(), "normalize_kernel");
  c *= std::sqrt((k.units() - 1.0) / ss);
  return PermKernel(std::move(c));
}

MultiKernel normalize_kernel(const MultiKernel& k) {
  const int h = k.dims();
  const MultiMoments mom = perm_stat_moments(k);
  linalg::require_well_conditioned(mom.covariance, "permutation statistic covariance");
  const MatrixXd w = linalg::inverse_sqrt(mom.covariance);
  std::vector<MatrixXd> c;
  for (int a = 0; a < h; ++a) c.push_back(center_kernel(k[a]));
  std::vector<MatrixXd> out;
  for (int a = 0; a < h; ++a) {
    MatrixXd m = MatrixXd::Zero(k.units(), k.units());
    for (int b = 0; b < h; ++b) simd::axpy(w(a, b), entries(c[static_cast<std::size_t>(b)]), entries(m));
    out.push_back(std::move(m));
  }
  return MultiKernel(std::move(out));
}

double normalization_error(const PermKernel& k) { return normalization_error(MultiKernel({k.matrix()})); }

double normalization_error(const MultiKernel& k) {
  const double target = k.units() - 1.0;
  double err = 0.0;
  for (int a = 0; a < k.dims(); ++a) {
    err = std::max(err, k[a].rowwise().sum().cwiseAbs().maxCoeff());
    err = std::max(err, k[a].colwise().sum().cwiseAbs().maxCoeff());
    for (int b = 0; b <= a; ++b) {
      const double ip = simd::dot(entries(k[a]), entries(k[b]));
      err = std::max(err, std::fabs(ip - (a == b ? target : 0.0)) / target);
    }
  }
  return err;
}

double bolthausen_bound(const PermKernel& k, bool auto_normalize) {
  if (normalization_error(k) > kNormalizedTolerance) {
    if (!auto_normalize) throw InvalidInput("bolthausen_bound: kernel is not normalized (centered, sum of squares N - 1)");
    return bolthausen_bound(normalize_kernel(k), false);
  }
  return simd::sum_abs_cubed(entries(k.matrix())) / k.units();
}

double multivariate_bound(const MultiKernel& k, bool auto_normalize) {
  if (normalization_error(k) > kNormalizedTolerance) {
    if (!auto_normalize) throw InvalidInput("multivariate_bound: kernels are not jointly normalized");
    return multivariate_bound(normalize_kernel(k), false);
  }
  std::vector<double> acc(static_cast<std::size_t>(k.units()) * static_cast<std::size_t>(k.units()), 0.0);
  for (const auto& m : k.matrices()) simd::add_squares(entries(m), acc);
  return simd::sum_pow_three_halves(acc) / k.units();
}

double multivariate_bound_conjectural(const MultiKernel& k, bool auto_normalize) {
  return std::pow(static_cast<double>(k.dims()), 0.25) * multivariate_bound(k, auto_normalize);
}

double factorial_beb_magnitude(const ScienceTable& table, const ContrastMatrix& contrast) {
  const int q = table.arms();
  int factors = 0;
  while ((1 << factors) < q) ++factors;
  if (q < 2 || (1 << factors) != q) throw InvalidInput("factorial magnitude needs Q = 2^K arms");
  if (contrast.arms() != q) throw InvalidInput("contrast rows differ from the number of arms");
  const int n = table.units();
  if (n < 2) throw InvalidInput("factorial magnitude needs N >= 2");
  double max_dev = 0.0;
  double min_var = std::numeric_limits<double>::infinity();
  for (int arm = 1; arm <= q; ++arm) {
    const auto y = table.arm_outcomes(arm);
    const double mu = simd::mean(y);
    min_var = std::min(min_var, simd::sum_sq_dev(y, mu) / (n - 1.0));
    for (double v : y) max_dev = std::max(max_dev, std::fabs(v - mu));
  }
  if (!(min_var > 0.0)) throw Infeasible("factorial magnitude: an arm has zero outcome variance");
  return max_dev / std::sqrt(min_var) * factors / std::sqrt(static_cast<double>(n));
}

double gamma_N(const ScienceTable& table, const CovariateMatrix& x, double r1) {
  if (table.arms() != 2) throw InvalidInput("gamma_N needs a two-arm table");
  if (x.units() != table.units()) throw InvalidInput("covariate rows differ from the table");
  if (!(r1 > 0.0 && r1 < 1.0)) throw InvalidInput("gamma_N needs r_1 in (0, 1)");
  const int n = table.units();
  const int k = x.dims();
  const double r0 = 1.0 - r1;
  MatrixXd u(n, k + 1);
  for (int i = 0; i < n; ++i) u(i, 0) = r0 * table.outcome(i, kTreatedArm) + r1 * table.outcome(i, kControlArm);
  u.rightCols(k) = x.values();
  const CovariateMatrix uc(u);
  const MatrixXd s = uc.covariance();
  linalg::require_well_conditioned(s, "S_u^2");
  const MatrixXd w = linalg::inverse_sqrt(s);
  const MatrixXd z = uc.centered().values() * w;  // w is symmetric
  double cubes = 0.0;
  for (int i = 0; i < n; ++i) cubes += std::pow(z.row(i).norm(), 3);
  return std::pow(k + 1.0, 0.25) / std::sqrt(n * r1 * r0) * cubes / n;
}

RemBebQuantities rem_beb_quantities(const ScienceTable& table, const CovariateMatrix& x, int treated,
                                    double threshold) {
  if (treated < 1 || treated >= table.units()) throw InvalidInput("ReM quantities need 1 <= N_1 < N");
  if (!(threshold > 0.0)) throw InvalidInput("ReM threshold must be positive");
  RemBebQuantities q;
  q.gamma = gamma_N(table, x, static_cast<double>(treated) / table.units());
  q.acceptance = dist::chi_squared_cdf(x.dims(), threshold);
  q.ratio = q.acceptance / std::cbrt(q.gamma);
  return q;
}

std::vector<double> sample_standardized(const PermKernel& k, std::size_t draws, RngSeed seed, int workers) {
  const PermMoments mom = perm_stat_moments(k);
  if (!(mom.variance > 0.0)) throw Infeasible("sample_standardized: permutation statistic has zero variance");
  const double sd = std::sqrt(mom.variance);
  const auto n = static_cast<std::size_t>(k.units());
  const std::size_t blocks = (draws + kBlockDraws - 1) / kBlockDraws;
  const std::uint64_t base = seed.seed ^ mix64(seed.stream);
  std::vector<double> out(draws);
  const simd::KernelTable& kt = simd::active();
  auto run = [&](std::size_t first_block, std::size_t stride) {
    std::vector<std::int32_t> pi(n);
    for (std::size_t b = first_block; b < blocks; b += stride) {
      Rng rng(replicate_stream(base, b));
      std::iota(pi.begin(), pi.end(), 0);
      const std::size_t end = std::min(draws, (b + 1) * kBlockDraws);
      for (std::size_t r = b * kBlockDraws; r < end; ++r) {
        rng.shuffle(std::span<std::int32_t>(pi));
        out[r] = (kt.gather_sum(k.matrix().data(), n, pi.data(), n) - mom.mean) / sd;
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::clamp(workers, 1, 64));
  if (threads == 1 || blocks < 2) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

KolmogorovEstimate empirical_kolmogorov(const PermKernel& k, std::size_t draws, RngSeed seed, int workers) {
  if (draws < 100) throw InvalidInput("empirical_kolmogorov needs R >= 100");
  const std::vector<double> z = sample_standardized(k, draws, seed, workers);
  return {dist::kolmogorov_to_normal(z), draws, 0.5 / std::sqrt(static_cast<double>(draws))};
}

MatrixXd load_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kernel file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || cell.find_first_not_of(" \t", static_cast<std::size_t>(end - cell.c_str())) != std::string::npos) {
        throw InvalidInput(path + ": line " + std::to_string(lineno) + ", column " + std::to_string(col) +
                           ": not a number: '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const auto n = rows.size();
  if (n < 2) throw InvalidInput(path + ": kernel needs at least two rows");
  MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      throw InvalidInput(path + ": row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                         " entries, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

PermKernel bounded_two_point_kernel(int n) {
  if (n < 10) throw InvalidInput("bounded two-point family needs N >= 10");
  VectorXd a = VectorXd::Zero(n);
  a.head(n / 10).setOnes();
  return build_srs_kernel(a, n / 5);
}

PermKernel spiked_kernel(int n) {
  if (n < 2) throw InvalidInput("spiked family needs N >= 2");
  VectorXd a = VectorXd::Zero(n);
  a(0) = 1.0;
  return build_srs_kernel(a, n / 2);
}

}  // namespace randinf
