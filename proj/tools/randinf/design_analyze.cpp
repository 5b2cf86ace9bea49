#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "randinf/designs.hpp"
#include "randinf/errors.hpp"
#include "randinf/version.hpp"
#include "randinf/estimators.hpp"
#include "randinf/variance.hpp"

namespace randinf::cli {
namespace {

const char* structure_column(Structure s) {
  switch (s) {
    case Structure::stratum: return "stratum";
    case Structure::pair: return "pair";
    case Structure::cluster: return "cluster";
    default: return nullptr;
  }
}

DesignSpec parse_design(const RunConfig& cfg, const json& d, const CovariateMatrix* x) {
  const std::string type = get_string(d, "type", "design.type");
  if (type == "cre") {
    cfg.require_only(d, {"type", "counts"}, "design");
    return CreSpec{get_int_array(d, "counts", "design.counts")};
  }
  if (type == "rem") {
    cfg.require_only(d, {"type", "treated", "control", "threshold", "acceptance", "max_draws"}, "design");
    if (x == nullptr) throw InvalidInput("design type rem needs a covariate file (config field 'covariates')");
    RemSpec s;
    s.treated = static_cast<int>(get_int(d, "treated", "design.treated"));
    s.control = static_cast<int>(get_int(d, "control", "design.control"));
    const bool has_thr = find(d, "threshold") != nullptr, has_acc = find(d, "acceptance") != nullptr;
    if (has_thr == has_acc) throw InvalidInput("design type rem needs exactly one of 'threshold' or 'acceptance'");
    s.threshold = has_thr ? get_double(d, "threshold", "design.threshold")
                          : threshold_from_acceptance(x->dims(), get_double(d, "acceptance", "design.acceptance"));
    const long long max_draws = get_int(d, "max_draws", "design.max_draws", 1'000'000);
    if (max_draws < 1) throw InvalidInput("design.max_draws must be >= 1");
    s.max_draws = static_cast<std::size_t>(max_draws);
    return s;
  }
  if (type == "sre") {
    cfg.require_only(d, {"type", "strata"}, "design");
    const json* strata = find(d, "strata");
    if (strata == nullptr || !strata->is_array()) throw InvalidInput("config field 'design.strata' must be an array");
    SreSpec s;
    for (std::size_t k = 0; k < strata->size(); ++k) {
      const std::string path = "design.strata[" + std::to_string(k) + "]";
      cfg.require_only((*strata)[k], {"size", "treated"}, path);
      s.strata.push_back({static_cast<int>(get_int((*strata)[k], "size", path + ".size")),
                          static_cast<int>(get_int((*strata)[k], "treated", path + ".treated"))});
    }
    return s;
  }
  if (type == "mpe") {
    cfg.require_only(d, {"type", "pairs"}, "design");
    return MpeSpec{static_cast<int>(get_int(d, "pairs", "design.pairs"))};
  }
  if (type == "cluster") {
    cfg.require_only(d, {"type", "sizes", "treated"}, "design");
    ClusterSpec s;
    s.sizes = get_int_array(d, "sizes", "design.sizes");
    s.clusters = static_cast<int>(s.sizes.size());
    s.treated = static_cast<int>(get_int(d, "treated", "design.treated"));
    return s;
  }
  throw InvalidInput("unknown design type '" + type + "' (expected cre, rem, sre, mpe, cluster)");
}

ContrastMatrix parse_contrast(const json& cfg, int arms) {
  const json* c = find(cfg, "contrast");
  if (c == nullptr) {
    if (arms == 2) return ContrastMatrix::treatment_control();
    MatrixXd f = MatrixXd::Zero(arms, arms - 1);
    for (int q = 1; q < arms; ++q) {
      f(0, q - 1) = -1.0;
      f(q, q - 1) = 1.0;
    }
    return ContrastMatrix(f);
  }
  if (!c->is_array() || c->empty()) throw InvalidInput("config field 'contrast' must be a Q x H array of rows");
  const auto rows = static_cast<Eigen::Index>(c->size());
  if (rows != arms) throw InvalidInput("config field 'contrast' needs one row per arm (" + std::to_string(arms) + ")");
  const auto cols = static_cast<Eigen::Index>((*c)[0].is_array() ? (*c)[0].size() : 0);
  MatrixXd f(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = (*c)[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols || cols == 0) {
      throw InvalidInput("config field 'contrast' rows must be non-empty arrays of equal length");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!row[static_cast<std::size_t>(j)].is_number()) throw InvalidInput("config field 'contrast' must hold numbers");
      f(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
  }
  return ContrastMatrix(f);
}

ojson interval_json(const EstimateReport& r) {
  ojson j;
  j["kind"] = r.kind == IntervalKind::interval ? "interval" : r.kind == IntervalKind::region ? "region" : "none";
  j["critical"] = r.kind == IntervalKind::none ? ojson() : ojson(r.critical);
  j["lower"] = r.kind == IntervalKind::interval ? to_json(r.lower) : ojson();
  j["upper"] = r.kind == IntervalKind::interval ? to_json(r.upper) : ojson();
  return j;
}

EstimateReport point_only(const std::string& method, double estimate, double alpha, std::string warning) {
  EstimateReport r;
  r.method = method;
  r.estimate = VectorXd::Constant(1, estimate);
  r.alpha = alpha;
  r.warnings.push_back(std::move(warning));
  return r;
}

WaldMode interval_mode(const json& cfg, int effects) {
  const std::string m = get_string(cfg, "interval", "interval", effects == 1 ? "interval" : "region");
  if (m == "interval") {
    if (effects != 1) throw InvalidInput("interval needs a single effect; use interval = region");
    return WaldMode::interval;
  }
  if (m == "region") return WaldMode::region;
  throw InvalidInput("config field 'interval' must be 'interval' or 'region'");
}

}  // namespace

int cmd_design(const Options& opt_in) {
  Options opt = opt_in;
  RunConfig cfg = load_config(opt);
  cfg.require_only(cfg.values, {"design", "covariates", "seed", "zero_one_arms"}, "");
  const json& d = get_object(cfg.values, "design", "design");
  std::optional<CovariateMatrix> x;
  if (const json* cov = find(cfg.values, "covariates")) {
    if (!cov->is_string()) throw InvalidInput("config field 'covariates' must be a path");
    const std::string path = resolve(cfg, cov->get<std::string>());
    x.emplace(read_numeric_csv(path));
    if (!opt.inputs.empty()) throw InvalidInput("give the covariate file either on the command line or in the config");
    opt.inputs.push_back(path);
  } else if (opt.inputs.size() == 1) {
    x.emplace(read_numeric_csv(opt.inputs[0]));
  } else if (opt.inputs.size() > 1) {
    throw InvalidInput("design takes at most one covariate file");
  }
  const DesignSpec spec = parse_design(cfg, d, x ? &*x : nullptr);
  if (x && x->units() != design_units(spec)) {
    throw InvalidInput("covariate file has " + std::to_string(x->units()) + " rows, design has " +
                       std::to_string(design_units(spec)) + " units");
  }
  const bool zero_one = get_bool(cfg.values, "zero_one_arms", "zero_one_arms", false);
  const std::uint64_t seed = cfg.values.at("seed").get<std::uint64_t>();
  Rng rng({seed, 0});
  const DesignDraw dd = draw(spec, rng, x ? &*x : nullptr);
  const Assignment& a = dd.assignment;
  if (zero_one && a.arm_count() != 2) throw InvalidInput("zero_one_arms needs a two-arm design");
  const char* label = structure_column(a.structure());

  ojson summary = stamp(opt, cfg);
  summary["design"] = get_string(d, "type", "design.type");
  summary["units"] = a.units();
  summary["arms"] = a.arm_count();
  summary["counts"] = a.counts();
  summary["draws_used"] = dd.draws_used;
  if (std::holds_alternative<RemSpec>(spec)) {
    summary["threshold"] = real_or_inf(std::get<RemSpec>(spec).threshold);
    summary["distance"] = mahalanobis(*x, a);
  }
  std::vector<int> arms_out;
  for (int i = 0; i < a.units(); ++i) arms_out.push_back(zero_one ? (a.arm(i) == kTreatedArm ? 1 : 0) : a.arm(i));

  const std::string format = opt.format.empty() ? "csv" : opt.format;
  if (format == "json") {
    std::vector<int> units(static_cast<std::size_t>(a.units()));
    for (int i = 0; i < a.units(); ++i) units[static_cast<std::size_t>(i)] = i + 1;
    summary["assignment"] = {{"unit", units}, {"arm", arms_out}};
    if (label != nullptr) summary["assignment"][label] = a.labels();
    emit(opt, summary.dump(2));
    return 0;
  }
  std::ostringstream csv;
  csv << "unit,arm" << (label ? std::string(",") + label : "") << '\n';
  for (int i = 0; i < a.units(); ++i) {
    csv << i + 1 << ',' << arms_out[static_cast<std::size_t>(i)];
    if (label != nullptr) csv << ',' << a.labels()[static_cast<std::size_t>(i)];
    csv << '\n';
  }
  emit(opt, csv.str());
  (opt.out.empty() ? std::cerr : std::cout) << summary.dump(2) << '\n';
  return 0;
}

int cmd_analyze(const Options& opt) {
  RunConfig cfg = load_config(opt);
  cfg.require_only(cfg.values,
                   {"method", "contrast", "arms", "zero_one_arms", "interval", "sandwich", "threshold", "acceptance",
                    "cluster_method", "seed", "alpha", "reps"},
                   "");
  const json& c = cfg.values;
  const bool zero_one = get_bool(c, "zero_one_arms", "zero_one_arms", false);
  const int arms_hint = static_cast<int>(get_int(c, "arms", "arms", 0));
  Dataset data = read_dataset(opt.inputs.at(0), zero_one, arms_hint);
  if (!opt.assignment_path.empty()) {
    if (data.assignment) throw InvalidInput(opt.inputs[0] + ": data already has an arm column; drop --assignment");
    data.assignment = join_assignment(opt.assignment_path, data, zero_one, arms_hint);
  }
  if (!data.assignment) throw InvalidInput(opt.inputs[0] + ": required column 'arm' is missing (or pass --assignment)");
  const ObservedData obs(data.y, *data.assignment, data.covariates);
  const int q = obs.assignment.arm_count();
  const double alpha = get_double(c, "alpha", "alpha", 0.05);
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  const std::string method = get_string(c, "method", "method", "neyman");
  const auto need_x = [&]() -> const CovariateMatrix& {
    if (!data.covariates) throw InvalidInput("method " + method + " needs covariate columns x1..xK");
    return *data.covariates;
  };
  const auto need_two = [&] {
    if (q != 2) throw InvalidInput("method " + method + " needs exactly two arms");
  };

  EstimateReport rep;
  if (method == "neyman") {
    const ContrastMatrix f = parse_contrast(c, q);
    rep = wald(contrast_estimate(obs, f), neyman_var(obs, f), alpha, interval_mode(c, f.effects()), method);
    rep.tags = {{"estimate", "arm-mean contrast F' Yhat"},
                {"variance", "Neyman plug-in F' diag(Shat(q,q) / N_q) F"},
                {"interval", "Wald with normal or chi-square critical value"}};
  } else if (method == "ancova" || method == "lin") {
    const ContrastMatrix f = parse_contrast(c, q);
    const std::string sw = get_string(c, "sandwich", "sandwich", "hc2");
    if (sw != "hc0" && sw != "hc2") throw InvalidInput("config field 'sandwich' must be hc0 or hc2");
    const RegressionFit fit =
        regression_adjusted(obs, need_x(), method == "lin" ? AdjustMode::interacted : AdjustMode::additive, f);
    rep = wald(fit.tau, regression_variance(fit, f, sw == "hc0" ? Sandwich::hc0 : Sandwich::hc2), alpha,
               interval_mode(c, f.effects()), method);
    rep.tags = {{"estimate", method == "lin" ? "interacted regression on centered covariates, F' gamma"
                                             : "additive regression on centered covariates, F' gamma"},
                {"variance", sw == "hc0" ? "EHW sandwich F' Cov(gamma) F" : "HC2 sandwich F' Cov(gamma) F"},
                {"interval", "Wald with normal or chi-square critical value"}};
  } else if (method == "debiased") {
    need_two();
    const DebiasedEstimate d = debiased_lin(obs, need_x());
    rep = point_only(method, d.tau, alpha, "no variance estimator is provided for the debiased estimator");
    rep.extras = {{"tau_lin", d.tau_lin}, {"kappa", d.kappa}, {"delta_treated", d.delta_treated},
                  {"delta_control", d.delta_control}};
    rep.tags = {{"estimate", "interacted regression estimate minus leverage-weighted residual correction"}};
  } else if (method == "sre" || method == "mpe") {
    need_two();
    const double est = method == "sre" ? sre_estimate(obs).tau : mpe_estimate(obs).tau;
    rep = wald(VectorXd::Constant(1, est), MatrixXd::Constant(1, 1, sre_mpe_var(obs)), alpha, WaldMode::interval, method);
    rep.tags = {{"estimate", method == "sre" ? "stratum-size weighted difference in means" : "mean paired difference"},
                {"variance", method == "sre" ? "sum of pi_k^2 (Shat_k(1)/n_k1 + Shat_k(0)/n_k0)"
                                             : "sum (d_j - tau)^2 / (n (n - 1))"},
                {"interval", "Wald with normal critical value"}};
  } else if (method == "cluster") {
    need_two();
    const std::string cm = get_string(c, "cluster_method", "cluster_method", "cluster_total");
    if (cm == "cluster_total") {
      rep = wald(VectorXd::Constant(1, cluster_estimate(obs, ClusterMethod::cluster_total)),
                 MatrixXd::Constant(1, 1, cluster_total_var(obs)), alpha, WaldMode::interval, method);
      rep.tags = {{"estimate", "(M / N) x difference in mean cluster totals"},
                  {"variance", "Neyman plug-in on scaled cluster totals"},
                  {"interval", "Wald with normal critical value"}};
    } else if (cm == "unit_average") {
      rep = point_only(method, cluster_estimate(obs, ClusterMethod::unit_average), alpha,
                       "unit_average cluster estimate is reported without a variance");
      rep.tags = {{"estimate", "unit-level difference in means"}};
    } else {
      throw InvalidInput("config field 'cluster_method' must be cluster_total or unit_average");
    }
  } else if (method == "rem") {
    need_two();
    const CovariateMatrix& x = need_x();
    const bool has_thr = find(c, "threshold") != nullptr, has_acc = find(c, "acceptance") != nullptr;
    if (has_thr == has_acc) throw InvalidInput("method rem needs exactly one of 'threshold' or 'acceptance'");
    const double thr = has_thr ? get_double(c, "threshold", "threshold")
                               : threshold_from_acceptance(x.dims(), get_double(c, "acceptance", "acceptance"));
    const long long reps = get_int(c, "reps", "reps", 100'000);
    if (reps < 1000) throw InvalidInput("method rem needs reps >= 1000 reference draws");
    rep = rem_inference(obs, x, thr, alpha, static_cast<std::size_t>(reps),
                        RngSeed{c.at("seed").get<std::uint64_t>(), 0});
  } else {
    throw InvalidInput("unknown method '" + method + "' (expected neyman, ancova, lin, debiased, sre, mpe, cluster, rem)");
  }

  const std::string format = opt.format.empty() ? "json" : opt.format;
  if (format == "csv") {
    std::ostringstream csv;
    csv << "schema_version,method,effect,estimate,variance,lower,upper\n";
    for (Eigen::Index h = 0; h < rep.estimate.size(); ++h) {
      csv << kSchemaVersion << ',' << method << ',' << h + 1 << ',' << ojson(rep.estimate(h)).dump() << ','
          << (rep.variance.size() ? ojson(rep.variance(h, h)).dump() : "") << ','
          << (rep.kind == IntervalKind::interval ? ojson(rep.lower(h)).dump() : "") << ','
          << (rep.kind == IntervalKind::interval ? ojson(rep.upper(h)).dump() : "") << '\n';
    }
    emit(opt, csv.str());
    return 0;
  }
  ojson j = stamp(opt, cfg);
  j["method"] = rep.method;
  j["units"] = obs.units();
  j["arms"] = q;
  j["counts"] = obs.assignment.counts();
  j["alpha"] = alpha;
  j["estimate"] = to_json(rep.estimate);
  j["variance"] = rep.variance.size() ? to_json(rep.variance) : ojson();
  j["interval"] = interval_json(rep);
  j["extras"] = ojson(rep.extras);
  j["tags"] = ojson(rep.tags);
  j["warnings"] = rep.warnings;
  emit(opt, j.dump(2));
  return 0;
}

}  // namespace randinf::cli
