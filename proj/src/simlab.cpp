#include "randinf/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "randinf/designs.hpp"
#include "randinf/distributions.hpp"
#include "randinf/errors.hpp"
#include "randinf/estimators.hpp"
#include "randinf/variance.hpp"

namespace randinf {
namespace {

constexpr std::uint64_t kDgpStream = 0xd6e;
constexpr std::uint64_t kReferenceStream = 0x4ef;

// Runs body(r) for r in [0, n) over `workers` threads, striding by worker.
// The first exception is rethrown after all threads join.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body body) {
  const auto threads = static_cast<std::size_t>(std::clamp(workers, 1, 64));
  if (threads == 1 || n < 2) {
    for (std::size_t r = 0; r < n; ++r) body(r);
    return;
  }
  std::exception_ptr failure;
  std::mutex mu;
  auto run = [&](std::size_t first) {
    try {
      for (std::size_t r = first; r < n; r += threads) body(r);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!failure) failure = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

double column_mean(const MatrixXd& m, int c) { return m.col(c).mean(); }

double column_var(const MatrixXd& m, int c) {
  const double mu = m.col(c).mean();
  return (m.col(c).array() - mu).square().sum() / static_cast<double>(m.rows() - 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate(const DgpSpec& s) {
  if (s.units < 4) throw InvalidInput("DGP needs N >= 4");
  if (s.arms < 2) throw InvalidInput("DGP needs Q >= 2");
  if (s.dims < 0) throw InvalidInput("DGP needs K >= 0");
  if (!(s.r2 >= 0.0 && s.r2 < 1.0)) throw InvalidInput("DGP r2 must lie in [0, 1)");
  if (s.dims > 1 && !(s.correlation > -1.0 / (s.dims - 1) && s.correlation < 1.0)) {
    throw InvalidInput("DGP covariate correlation must keep the covariance positive definite");
  }
  if (!std::isfinite(s.effect) || !std::isfinite(s.heterogeneity)) throw InvalidInput("DGP effect parameters must be finite");
}

const char* dgp_name(DgpKind kind) {
  switch (kind) {
    case DgpKind::additive_effect: return "additive_effect";
    case DgpKind::linear_homoskedastic: return "linear_homoskedastic";
    case DgpKind::linear_heteroskedastic: return "linear_heteroskedastic";
    case DgpKind::heavy_tail: return "heavy_tail";
  }
  return "unknown";
}

DgpKind parse_dgp(const std::string& name) {
  for (DgpKind k : {DgpKind::additive_effect, DgpKind::linear_homoskedastic, DgpKind::linear_heteroskedastic,
                    DgpKind::heavy_tail}) {
    if (name == dgp_name(k)) return k;
  }
  throw InvalidInput("unknown generator '" + name + "'");
}

GeneratedData generate(const DgpSpec& s) {
  validate(s);
  Rng rng({s.seed, kDgpStream});
  const int n = s.units, k = s.dims, q = s.arms;
  MatrixXd x(n, k);
  VectorXd signal = VectorXd::Zero(n);
  if (k > 0) {
    MatrixXd sigma = MatrixXd::Constant(k, k, s.correlation);
    sigma.diagonal().setOnes();
    const MatrixXd l = sigma.llt().matrixL();
    MatrixXd z(n, k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) z(i, j) = rng.normal();
    x = z * l.transpose();
    const double scale = std::sqrt(s.r2 / (1.0 - s.r2) / sigma.sum());
    signal = x.rowwise().sum() * scale;
  }
  MatrixXd y(n, q);
  std::student_t_distribution<double> t3(3.0);
  const VectorXd shared = [&] {
    VectorXd e(n);
    for (int i = 0; i < n; ++i) e(i) = rng.normal();
    return e;
  }();
  for (int arm = 0; arm < q; ++arm) {
    for (int i = 0; i < n; ++i) {
      double mean = arm * s.effect + signal(i);
      double noise = 0.0;
      if (s.kind == DgpKind::additive_effect) {
        noise = shared(i);
      } else {
        if (k > 0) mean += s.heterogeneity * arm * x(i, 0);
        switch (s.kind) {
          case DgpKind::linear_homoskedastic: noise = rng.normal(); break;
          case DgpKind::linear_heteroskedastic:
            noise = (0.5 + (k > 0 ? std::fabs(x(i, 0)) : 0.0)) * (1.0 + arm / 2.0) * rng.normal();
            break;
          default: noise = t3(rng.engine()) / std::sqrt(3.0); break;
        }
      }
      y(i, arm) = mean + noise;
    }
  }
  GeneratedData out{ScienceTable(std::move(y)), std::nullopt};
  if (k > 0) out.covariates.emplace(std::move(x));
  return out;
}

AuditResult exact_audit(const ScienceTable& table, std::span<const int> counts, const ContrastMatrix& contrast) {
  if (static_cast<int>(counts.size()) != table.arms()) throw InvalidInput("counts must list every arm");
  for (int c : counts) {
    if (c < 2) throw InvalidInput("exact audit needs N_q >= 2 in every arm");
  }
  const std::vector<Assignment> support = enumerate_cre(counts);
  const FpMoments fp = fp_moments(table, contrast);
  const int h = contrast.effects();
  AuditResult r;
  r.support = support.size();
  r.truth = fp.effects;
  r.mean_estimate = VectorXd::Zero(h);
  r.mean_vhat = MatrixXd::Zero(h, h);
  std::vector<VectorXd> estimates;
  estimates.reserve(support.size());
  for (const auto& a : support) {
    const ObservedData obs = observe(table, a);
    estimates.push_back(contrast_estimate(obs, contrast));
    r.mean_estimate += estimates.back();
    r.mean_vhat += neyman_var(obs, contrast);
  }
  const auto m = static_cast<double>(support.size());
  r.mean_estimate /= m;
  r.mean_vhat /= m;
  r.estimate_covariance = MatrixXd::Zero(h, h);
  for (const auto& e : estimates) {
    const VectorXd d = e - r.mean_estimate;
    r.estimate_covariance += d * d.transpose();
  }
  r.estimate_covariance /= m;
  r.oracle_covariance = true_var_oracle(table, counts, contrast);
  VectorXd d(table.arms());
  for (int q = 0; q < table.arms(); ++q) d(q) = fp.covariance(q, q) / counts[static_cast<std::size_t>(q)];
  r.expected_vhat = contrast.matrix().transpose() * d.asDiagonal() * contrast.matrix();
  return r;
}

const char* estimator_name(SimEstimator e) {
  switch (e) {
    case SimEstimator::neyman: return "neyman";
    case SimEstimator::ancova: return "ancova";
    case SimEstimator::lin: return "lin";
    case SimEstimator::rem: return "rem";
  }
  return "unknown";
}

SimEstimator parse_estimator(const std::string& name) {
  for (SimEstimator e : {SimEstimator::neyman, SimEstimator::ancova, SimEstimator::lin, SimEstimator::rem}) {
    if (name == estimator_name(e)) return e;
  }
  throw InvalidInput("unknown estimator '" + name + "'");
}

const char* design_name(SimDesignKind d) { return d == SimDesignKind::cre ? "cre" : "rem"; }

SimStudy repeated_sampling(const DgpSpec& dgp, const SimDesign& design, const std::vector<SimEstimator>& estimators,
                           const SimSettings& settings) {
  if (settings.replications < 100) throw InvalidInput("repeated sampling needs R >= 100");
  if (!(settings.alpha > 0.0 && settings.alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  if (estimators.empty()) throw InvalidInput("no estimators requested");
  if (dgp.arms != 2) throw InvalidInput("repeated sampling supports two arms");
  const GeneratedData data = generate(dgp);
  const int n = dgp.units;
  if (design.treated < 2 || design.treated > n - 2) throw InvalidInput("design needs 2 <= N_1 <= N - 2");
  const bool rem_design = design.kind == SimDesignKind::rem;
  for (SimEstimator e : estimators) {
    if (e != SimEstimator::neyman && !data.covariates) {
      throw InvalidInput(std::string(estimator_name(e)) + " needs covariates (K >= 1)");
    }
    if (e == SimEstimator::rem && !rem_design) throw InvalidInput("the rem estimator needs the rem design");
  }
  if (rem_design && !data.covariates) throw InvalidInput("the rem design needs covariates (K >= 1)");

  const ContrastMatrix f = ContrastMatrix::treatment_control();
  const double truth = fp_moments(data.table, f).effects(0);
  const double z = dist::normal_two_sided_critical(settings.alpha);
  std::optional<BalanceCriterion> criterion;
  RemSpec rem_spec{design.treated, n - design.treated, design.threshold, design.max_draws};
  if (rem_design) {
    validate(DesignSpec(rem_spec));
    criterion.emplace(*data.covariates);
  }
  std::optional<RemReference> ref;
  if (std::find(estimators.begin(), estimators.end(), SimEstimator::rem) != estimators.end()) {
    ref = rem_reference_draws(dgp.dims, design.threshold, settings.rem_reference_draws,
                              RngSeed{settings.seed, kReferenceStream});
  }

  const auto reps = settings.replications;
  const auto cols = static_cast<Eigen::Index>(estimators.size());
  SimStudy study;
  study.estimates.resize(static_cast<Eigen::Index>(reps), cols);
  study.variances.resize(static_cast<Eigen::Index>(reps), cols);
  study.lengths.resize(static_cast<Eigen::Index>(reps), cols);
  MatrixXd covered(static_cast<Eigen::Index>(reps), cols);
  std::vector<double> draws(reps, 1.0);
  const int counts[2] = {n - design.treated, design.treated};

  parallel_for(reps, settings.workers, [&](std::size_t r) {
    Rng rng(replicate_stream(settings.seed, r));
    Assignment a = rem_design ? [&] {
      RemDraw d = draw_rem(*criterion, rem_spec, rng);
      draws[r] = static_cast<double>(d.draws_used);
      return std::move(d.assignment);
    }()
                              : draw_cre(counts, rng);
    const ObservedData obs = observe(data.table, a);
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index c = 0; c < cols; ++c) {
      double est = 0.0, var = 0.0, lo = 0.0, hi = 0.0;
      switch (estimators[static_cast<std::size_t>(c)]) {
        case SimEstimator::neyman:
          est = difference_in_means(obs);
          var = neyman_var(obs, f)(0, 0);
          break;
        case SimEstimator::ancova:
        case SimEstimator::lin: {
          const AdjustMode mode =
              estimators[static_cast<std::size_t>(c)] == SimEstimator::lin ? AdjustMode::interacted : AdjustMode::additive;
          const RegressionFit fit = regression_adjusted(obs, *data.covariates, mode, f);
          est = fit.tau(0);
          var = regression_variance(fit, f, Sandwich::hc2)(0, 0);
          break;
        }
        case SimEstimator::rem: {
          const EstimateReport rep = rem_inference(obs, *data.covariates, design.threshold, settings.alpha, *ref);
          est = rep.estimate(0);
          var = rep.variance(0, 0);
          lo = rep.lower(0);
          hi = rep.upper(0);
          break;
        }
      }
      if (estimators[static_cast<std::size_t>(c)] != SimEstimator::rem) {
        const double half = z * std::sqrt(var);
        lo = est - half;
        hi = est + half;
      }
      study.estimates(row, c) = est;
      study.variances(row, c) = var;
      study.lengths(row, c) = hi - lo;
      covered(row, c) = (lo <= truth && truth <= hi) ? 1.0 : 0.0;
    }
  });

  const auto rd = static_cast<double>(reps);
  const double mean_draws = std::accumulate(draws.begin(), draws.end(), 0.0) / rd;
  for (Eigen::Index c = 0; c < cols; ++c) {
    SimResult s;
    s.estimator = estimator_name(estimators[static_cast<std::size_t>(c)]);
    s.design = design_name(design.kind);
    s.replications = reps;
    s.truth = truth;
    s.bias = column_mean(study.estimates, static_cast<int>(c)) - truth;
    s.mc_variance = column_var(study.estimates, static_cast<int>(c));
    s.mean_vhat = column_mean(study.variances, static_cast<int>(c));
    s.coverage = column_mean(covered, static_cast<int>(c));
    s.mean_length = column_mean(study.lengths, static_cast<int>(c));
    s.se_bias = std::sqrt(s.mc_variance / rd);
    s.se_variance = s.mc_variance * std::sqrt(2.0 / (rd - 1.0));
    s.se_mean_vhat = std::sqrt(column_var(study.variances, static_cast<int>(c)) / rd);
    s.se_coverage = std::sqrt(s.coverage * (1.0 - s.coverage) / rd);
    s.mean_draws = mean_draws;
    study.results.push_back(std::move(s));
  }
  return study;
}

double rem_population_r2(const ScienceTable& table, const CovariateMatrix& x, int treated) {
  if (table.arms() != 2) throw InvalidInput("ReM R^2 needs a two-arm table");
  const int n = table.units(), k = x.dims();
  if (x.units() != n) throw InvalidInput("covariate rows differ from the table");
  if (treated < 1 || treated >= n) throw InvalidInput("ReM R^2 needs 1 <= N_1 < N");
  MatrixXd joint(n, k + 2);
  for (int i = 0; i < n; ++i) {
    joint(i, 0) = table.outcome(i, kTreatedArm);
    joint(i, 1) = table.outcome(i, kControlArm);
  }
  joint.rightCols(k) = x.values();
  const MatrixXd s = CovariateMatrix(joint).covariance();
  const double n1 = treated, n0 = n - treated;
  const double s_tau = s(0, 0) + s(1, 1) - 2.0 * s(0, 1);
  const double var_tau = s(0, 0) / n1 + s(1, 1) / n0 - s_tau / n;
  if (!(var_tau > 0.0)) throw Infeasible("ReM R^2: difference in means has zero variance");
  const VectorXd c = s.block(2, 0, k, 1) / n1 + s.block(2, 1, k, 1) / n0;
  const MatrixXd sx = s.bottomRightCorner(k, k) * (n / (n1 * n0));
  return std::clamp(c.dot(sx.ldlt().solve(c)) / var_tau, 0.0, 1.0);
}

RemCheck rem_distribution_check(const DgpSpec& dgp, int treated, double threshold, std::size_t accepted,
                                std::size_t reference, std::uint64_t seed, RemReferenceKind kind, int workers) {
  if (accepted < 100 || reference < 100) throw InvalidInput("ReM check needs at least 100 draws on each side");
  if (dgp.arms != 2 || dgp.dims < 1) throw InvalidInput("ReM check needs two arms and K >= 1");
  const GeneratedData data = generate(dgp);
  const int n = dgp.units;
  const RemSpec spec{treated, n - treated, threshold, 10'000'000};
  validate(DesignSpec(spec));
  RemCheck out;
  out.acceptance = acceptance_probability(dgp.dims, threshold);
  if (out.acceptance < 1e-6) throw Infeasible("ReM check: acceptance probability below 1e-6");
  const ContrastMatrix f = ContrastMatrix::treatment_control();
  const int counts[2] = {n - treated, treated};
  const double truth = fp_moments(data.table, f).effects(0);
  const double sd = std::sqrt(true_var_oracle(data.table, counts, f)(0, 0));
  out.r2 = rem_population_r2(data.table, *data.covariates, treated);

  const BalanceCriterion criterion(*data.covariates);
  std::vector<double> z(accepted), draws(accepted);
  parallel_for(accepted, workers, [&](std::size_t r) {
    Rng rng(replicate_stream(seed, r));
    const RemDraw d = draw_rem(criterion, spec, rng);
    draws[r] = static_cast<double>(d.draws_used);
    z[r] = (difference_in_means(observe(data.table, d.assignment)) - truth) / sd;
  });

  const RemReference ref = rem_reference_draws(dgp.dims, threshold, reference, RngSeed{seed, kReferenceStream});
  std::vector<double> ref_values(reference);
  const double a = std::sqrt(1.0 - out.r2), b = std::sqrt(out.r2);
  for (std::size_t i = 0; i < reference; ++i) {
    ref_values[i] = kind == RemReferenceKind::convolution ? a * ref.eps[i] + b * ref.constrained[i] : ref.eps[i];
  }
  out.distance = dist::kolmogorov_two_sample(z, ref_values);
  out.mc_error = 0.87 * std::sqrt(1.0 / accepted + 1.0 / reference);
  out.accepted = accepted;
  out.reference = reference;
  out.mean_draws = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(accepted);
  return out;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("log-log slope needs matching series of length >= 2");
  const auto m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw Infeasible("log-log slope needs positive values");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = m * sxx - sx * sx;
  if (!(den > 0.0)) throw InvalidInput("log-log slope needs distinct x values");
  const double slope = (m * sxy - sx * sy) / den;
  if (intercept != nullptr) *intercept = (sy - slope * sx) / m;
  return slope;
}

RateResult rate_experiment(const std::function<PermKernel(int)>& family, const std::vector<int>& grid,
                           std::size_t draws, std::uint64_t seed, int workers) {
  if (grid.size() < 3) throw InvalidInput("rate experiment needs at least 3 grid points");
  RateResult out;
  std::vector<double> xs;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const PermKernel k = family(grid[g]);
    const KolmogorovEstimate est = empirical_kolmogorov(k, draws, replicate_stream(seed, g), workers);
    out.units.push_back(grid[g]);
    out.distances.push_back(est.distance);
    out.mc_errors.push_back(est.mc_error);
    out.bounds.push_back(bolthausen_bound(k, true));
    xs.push_back(grid[g]);
  }
  out.slope = log_log_slope(xs, out.distances, &out.intercept);
  return out;
}

std::string sim_results_csv(const std::vector<SimResult>& results) {
  std::ostringstream os;
  os << "schema_version,estimator,design,replications,truth,bias,mc_variance,mean_vhat,coverage,mean_length,"
        "se_bias,se_variance,se_mean_vhat,se_coverage,mean_draws\n";
  for (const auto& r : results) {
    os << kSimSchemaVersion << ',' << r.estimator << ',' << r.design << ',' << r.replications << ',' << fmt(r.truth)
       << ',' << fmt(r.bias) << ',' << fmt(r.mc_variance) << ',' << fmt(r.mean_vhat) << ',' << fmt(r.coverage) << ','
       << fmt(r.mean_length) << ',' << fmt(r.se_bias) << ',' << fmt(r.se_variance) << ',' << fmt(r.se_mean_vhat)
       << ',' << fmt(r.se_coverage) << ',' << fmt(r.mean_draws) << '\n';
  }
  return os.str();
}

std::string rate_csv(const RateResult& rate) {
  std::ostringstream os;
  os << "schema_version,units,distance,mc_error,bound\n";
  for (std::size_t i = 0; i < rate.units.size(); ++i) {
    os << kSimSchemaVersion << ',' << rate.units[i] << ',' << fmt(rate.distances[i]) << ',' << fmt(rate.mc_errors[i])
       << ',' << fmt(rate.bounds[i]) << '\n';
  }
  return os.str();
}

}  // namespace randinf
