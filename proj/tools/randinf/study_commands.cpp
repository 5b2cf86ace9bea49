#include <cmath>
#include <sstream>

#include "commands.hpp"
#include "randinf/designs.hpp"
#include "randinf/errors.hpp"
#include "randinf/version.hpp"
#include "randinf/frt.hpp"
#include "randinf/perm_limits.hpp"
#include "randinf/simlab.hpp"

namespace randinf::cli {
namespace {

// Named configurations that reproduce the acceptance studies.
json preset(const std::string& name) {
  const json rem_dgp = {{"units", 1000}, {"dims", 2}, {"kind", "additive_effect"}, {"r2", 0.8}, {"seed", 4}};
  if (name == "coverage_additive") {
    return {{"study", "repeated_sampling"},
            {"dgp", {{"units", 400}, {"kind", "additive_effect"}, {"seed", 1}}},
            {"design", {{"type", "cre"}, {"treated", 200}}},
            {"estimators", {"neyman"}},
            {"reps", 4000}};
  }
  if (name == "coverage_heterogeneous") {
    return {{"study", "repeated_sampling"},
            {"dgp",
             {{"units", 400}, {"dims", 1}, {"kind", "linear_heteroskedastic"}, {"r2", 0.3}, {"heterogeneity", 1.0},
              {"seed", 2}}},
            {"design", {{"type", "cre"}, {"treated", 200}}},
            {"estimators", {"neyman"}},
            {"reps", 4000}};
  }
  if (name == "efficiency") {
    return {{"study", "repeated_sampling"},
            {"dgp",
             {{"units", 1000}, {"dims", 3}, {"kind", "linear_heteroskedastic"}, {"r2", 0.6}, {"heterogeneity", 0.5},
              {"correlation", 0.3}, {"seed", 3}}},
            {"design", {{"type", "cre"}, {"treated", 500}}},
            {"estimators", {"lin", "ancova", "neyman"}},
            {"reps", 4000}};
  }
  if (name == "rem_law" || name == "rem_law_negative") {
    return {{"study", "rem_check"}, {"dgp", rem_dgp}, {"treated", 500}, {"acceptance", 0.05}, {"reps", 2000},
            {"reference", 100000}, {"reference_kind", name == "rem_law" ? "convolution" : "normal"}};
  }
  if (name == "rem_gain") {
    return {{"study", "rem_gain"}, {"dgp", rem_dgp}, {"treated", 500}, {"acceptance", 0.05}, {"reps", 2000}};
  }
  if (name == "beb_rate_bounded" || name == "beb_rate_spiked") {
    return {{"study", "rate"},
            {"family", name == "beb_rate_bounded" ? "bounded_two_point" : "spiked"},
            {"grid", {50, 200, 800}},
            {"reps", 50000}};
  }
  throw InvalidInput("unknown preset '" + name +
                     "' (expected coverage_additive, coverage_heterogeneous, efficiency, rem_law, rem_law_negative, "
                     "rem_gain, beb_rate_bounded, beb_rate_spiked)");
}

DgpSpec parse_dgp(const RunConfig& cfg, const json& d, std::uint64_t seed) {
  cfg.require_only(d, {"units", "arms", "dims", "kind", "effect", "r2", "heterogeneity", "correlation", "seed"}, "dgp");
  DgpSpec s;
  s.units = static_cast<int>(get_int(d, "units", "dgp.units"));
  s.arms = static_cast<int>(get_int(d, "arms", "dgp.arms", 2));
  s.dims = static_cast<int>(get_int(d, "dims", "dgp.dims", 0));
  s.kind = randinf::parse_dgp(get_string(d, "kind", "dgp.kind", "additive_effect"));
  s.effect = get_double(d, "effect", "dgp.effect", 1.0);
  s.r2 = get_double(d, "r2", "dgp.r2", 0.0);
  s.heterogeneity = get_double(d, "heterogeneity", "dgp.heterogeneity", 0.0);
  s.correlation = get_double(d, "correlation", "dgp.correlation", 0.0);
  s.seed = static_cast<std::uint64_t>(get_int(d, "seed", "dgp.seed", static_cast<long long>(seed)));
  validate(s);
  return s;
}

double rem_threshold(const json& c, const std::string& path, int dims) {
  const bool has_thr = find(c, "threshold") != nullptr, has_acc = find(c, "acceptance") != nullptr;
  if (has_thr == has_acc) throw InvalidInput(path + " needs exactly one of 'threshold' or 'acceptance'");
  return has_thr ? get_double(c, "threshold", path + ".threshold")
                 : threshold_from_acceptance(dims, get_double(c, "acceptance", path + ".acceptance"));
}

ojson result_json(const SimResult& r) {
  return {{"estimator", r.estimator},   {"design", r.design},           {"replications", r.replications},
          {"truth", r.truth},           {"bias", r.bias},               {"mc_variance", r.mc_variance},
          {"mean_vhat", r.mean_vhat},   {"coverage", r.coverage},       {"mean_length", r.mean_length},
          {"se_bias", r.se_bias},       {"se_variance", r.se_variance}, {"se_mean_vhat", r.se_mean_vhat},
          {"se_coverage", r.se_coverage}, {"mean_draws", r.mean_draws}};
}

ojson results_json(const std::vector<SimResult>& rs) {
  ojson a = ojson::array();
  for (const auto& r : rs) a.push_back(result_json(r));
  return a;
}

std::size_t positive_count(const json& c, const char* key, const std::string& path, long long fallback) {
  const long long v = get_int(c, key, path, fallback);
  if (v < 1) throw InvalidInput("config field '" + path + "' must be positive");
  return static_cast<std::size_t>(v);
}

std::string key_value_csv(const ojson& j, std::initializer_list<const char*> keys) {
  std::ostringstream os;
  os << "schema_version";
  for (const char* k : keys) os << ',' << k;
  os << '\n' << kSchemaVersion;
  for (const char* k : keys) os << ',' << j.at(k).dump();
  os << '\n';
  return os.str();
}

}  // namespace

int cmd_frt(const Options& opt) {
  RunConfig cfg = load_config(opt);
  cfg.require_only(cfg.values,
                   {"statistic", "mode", "alternative", "effect", "zero_one_arms", "arms", "seed", "alpha", "reps"}, "");
  const json& c = cfg.values;
  const bool zero_one = get_bool(c, "zero_one_arms", "zero_one_arms", false);
  const int arms_hint = static_cast<int>(get_int(c, "arms", "arms", 0));
  Dataset data = read_dataset(opt.inputs.at(0), zero_one, arms_hint);
  if (!opt.assignment_path.empty()) {
    if (data.assignment) throw InvalidInput(opt.inputs[0] + ": data already has an arm column; drop --assignment");
    data.assignment = join_assignment(opt.assignment_path, data, zero_one, arms_hint);
  }
  if (!data.assignment) throw InvalidInput(opt.inputs[0] + ": required column 'arm' is missing (or pass --assignment)");
  const ObservedData obs(data.y, *data.assignment);

  FrtSpec spec;
  const std::string stat = get_string(c, "statistic", "statistic", "diff_in_means");
  if (stat == "diff_in_means") spec.statistic = FrtStatistic::diff_in_means;
  else if (stat == "studentized") spec.statistic = FrtStatistic::studentized;
  else throw InvalidInput("config field 'statistic' must be diff_in_means or studentized");
  const std::string mode = get_string(c, "mode", "mode", "exact");
  if (mode == "exact") spec.mode = FrtMode::exact;
  else if (mode == "monte_carlo") spec.mode = FrtMode::monte_carlo;
  else throw InvalidInput("config field 'mode' must be exact or monte_carlo");
  const std::string alt = get_string(c, "alternative", "alternative", "two_sided");
  if (alt == "two_sided") spec.sides = Sidedness::two_sided;
  else if (alt == "greater") spec.sides = Sidedness::greater;
  else if (alt == "less") spec.sides = Sidedness::less;
  else throw InvalidInput("config field 'alternative' must be two_sided, greater or less");
  spec.resamples = positive_count(c, "reps", "reps", 10000);
  if (find(c, "effect") != nullptr) spec.effect = VectorXd::Constant(obs.units(), get_double(c, "effect", "effect"));
  const double alpha = get_double(c, "alpha", "alpha", 0.05);
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");

  const FrtResult r = frt(obs, spec, RngSeed{c.at("seed").get<std::uint64_t>(), 0});
  ojson j = stamp(opt, cfg);
  j["statistic"] = stat;
  j["mode"] = mode;
  j["alternative"] = alt;
  j["effect"] = find(c, "effect") ? ojson(get_double(c, "effect", "effect")) : ojson(0.0);
  j["p_value"] = r.p_value;
  j["observed"] = r.observed;
  j["reference_size"] = r.reference.size();
  j["alpha"] = alpha;
  j["reject"] = r.p_value <= alpha;
  j["studentized_fallback"] = r.studentized_fallback;
  j["warnings"] = r.warnings;
  if ((opt.format.empty() ? "json" : opt.format) == std::string("csv")) {
    emit(opt, key_value_csv(j, {"statistic", "mode", "alternative", "p_value", "observed", "reference_size", "alpha", "reject"}));
  } else {
    emit(opt, j.dump(2));
  }
  return 0;
}

int cmd_simulate(const Options& opt) {
  RunConfig cfg = load_config(opt);
  if (const json* p = find(cfg.values, "preset")) {
    if (!p->is_string()) throw InvalidInput("config field 'preset' must be a string");
    json merged = preset(p->get<std::string>());
    for (const auto& [key, value] : cfg.values.items()) {
      if (key == "dgp" && value.is_object() && merged.contains("dgp")) {
        merged["dgp"].update(value);
      } else {
        merged[key] = value;
      }
    }
    cfg.values = merged;
  }
  json& c = cfg.values;
  const std::string study = get_string(c, "study", "study");
  const std::uint64_t seed = c.at("seed").get<std::uint64_t>();
  const int workers = static_cast<int>(get_int(c, "workers", "workers", 1));
  if (workers < 1) throw InvalidInput("config field 'workers' must be >= 1");
  ojson j;
  std::string csv;

  if (study == "repeated_sampling") {
    cfg.require_only(c, {"study", "preset", "dgp", "design", "estimators", "workers", "reference_draws", "seed", "alpha", "reps"},
                     "");
    const DgpSpec dgp = parse_dgp(cfg, get_object(c, "dgp", "dgp"), seed);
    const json& d = get_object(c, "design", "design");
    cfg.require_only(d, {"type", "treated", "threshold", "acceptance", "max_draws"}, "design");
    SimDesign design;
    const std::string type = get_string(d, "type", "design.type", "cre");
    if (type == "rem") {
      design.kind = SimDesignKind::rem;
      design.threshold = rem_threshold(d, "design", dgp.dims);
    } else if (type != "cre") {
      throw InvalidInput("config field 'design.type' must be cre or rem");
    }
    design.treated = static_cast<int>(get_int(d, "treated", "design.treated", dgp.units / 2));
    design.max_draws = positive_count(d, "max_draws", "design.max_draws", 1'000'000);
    std::vector<SimEstimator> est;
    const json* e = find(c, "estimators");
    if (e == nullptr || !e->is_array() || e->empty()) throw InvalidInput("config field 'estimators' must be a non-empty array");
    for (const auto& name : *e) {
      if (!name.is_string()) throw InvalidInput("config field 'estimators' must hold names");
      est.push_back(parse_estimator(name.get<std::string>()));
    }
    SimSettings s;
    s.replications = positive_count(c, "reps", "reps", 1000);
    s.alpha = get_double(c, "alpha", "alpha", 0.05);
    s.seed = seed;
    s.workers = workers;
    s.rem_reference_draws = positive_count(c, "reference_draws", "reference_draws", 100'000);
    const SimStudy st = repeated_sampling(dgp, design, est, s);
    j = stamp(opt, cfg);
    j["study"] = study;
    j["results"] = results_json(st.results);
    csv = sim_results_csv(st.results);
  } else if (study == "rem_gain") {
    cfg.require_only(c, {"study", "preset", "dgp", "treated", "threshold", "acceptance", "workers", "reference_draws",
                         "seed", "alpha", "reps"},
                     "");
    const DgpSpec dgp = parse_dgp(cfg, get_object(c, "dgp", "dgp"), seed);
    const int treated = static_cast<int>(get_int(c, "treated", "treated", dgp.units / 2));
    const double thr = rem_threshold(c, "rem_gain", dgp.dims);
    SimSettings s;
    s.replications = positive_count(c, "reps", "reps", 2000);
    s.alpha = get_double(c, "alpha", "alpha", 0.05);
    s.seed = seed;
    s.workers = workers;
    s.rem_reference_draws = positive_count(c, "reference_draws", "reference_draws", 100'000);
    const SimStudy rem =
        repeated_sampling(dgp, {SimDesignKind::rem, treated, thr}, {SimEstimator::neyman, SimEstimator::rem}, s);
    SimSettings sc = s;
    sc.seed = mix64(seed ^ 0xc4e);
    const SimStudy cre = repeated_sampling(dgp, {SimDesignKind::cre, treated}, {SimEstimator::neyman}, sc);
    std::size_t shorter = 0;
    for (Eigen::Index r = 0; r < rem.lengths.rows(); ++r) shorter += rem.lengths(r, 1) < rem.lengths(r, 0);
    const double reduction = cre.results[0].mc_variance - rem.results[0].mc_variance;
    const double se = std::hypot(cre.results[0].se_variance, rem.results[0].se_variance);
    j = stamp(opt, cfg);
    j["study"] = study;
    j["threshold"] = real_or_inf(thr);
    j["rem"] = results_json(rem.results);
    j["cre"] = results_json(cre.results);
    j["variance_reduction"] = reduction;
    j["variance_reduction_se"] = se;
    j["fraction_shorter"] = static_cast<double>(shorter) / static_cast<double>(rem.lengths.rows());
    std::vector<SimResult> all = rem.results;
    all.push_back(cre.results[0]);
    csv = sim_results_csv(all);
  } else if (study == "rem_check") {
    cfg.require_only(c, {"study", "preset", "dgp", "treated", "threshold", "acceptance", "reference", "reference_kind",
                         "workers", "seed", "reps"},
                     "");
    const DgpSpec dgp = parse_dgp(cfg, get_object(c, "dgp", "dgp"), seed);
    const int treated = static_cast<int>(get_int(c, "treated", "treated", dgp.units / 2));
    const double thr = rem_threshold(c, "rem_check", dgp.dims);
    const std::string kind = get_string(c, "reference_kind", "reference_kind", "convolution");
    if (kind != "convolution" && kind != "normal") throw InvalidInput("config field 'reference_kind' must be convolution or normal");
    const RemCheck r = rem_distribution_check(dgp, treated, thr, positive_count(c, "reps", "reps", 2000),
                                              positive_count(c, "reference", "reference", 100'000), seed,
                                              kind == "normal" ? RemReferenceKind::normal : RemReferenceKind::convolution,
                                              workers);
    j = stamp(opt, cfg);
    j["study"] = study;
    j["reference_kind"] = kind;
    j["threshold"] = real_or_inf(thr);
    j["distance"] = r.distance;
    j["mc_error"] = r.mc_error;
    j["r2"] = r.r2;
    j["acceptance"] = r.acceptance;
    j["accepted"] = r.accepted;
    j["reference"] = r.reference;
    j["mean_draws"] = r.mean_draws;
    csv = key_value_csv(j, {"distance", "mc_error", "r2", "acceptance", "accepted", "reference", "mean_draws"});
  } else if (study == "rate") {
    cfg.require_only(c, {"study", "preset", "family", "grid", "workers", "seed", "reps"}, "");
    const std::string family = get_string(c, "family", "family");
    std::function<PermKernel(int)> f;
    if (family == "bounded_two_point") f = bounded_two_point_kernel;
    else if (family == "spiked") f = spiked_kernel;
    else throw InvalidInput("config field 'family' must be bounded_two_point or spiked");
    const RateResult r = rate_experiment(f, get_int_array(c, "grid", "grid"), positive_count(c, "reps", "reps", 50000),
                                         seed, workers);
    j = stamp(opt, cfg);
    j["study"] = study;
    j["family"] = family;
    j["units"] = r.units;
    j["distances"] = r.distances;
    j["mc_errors"] = r.mc_errors;
    j["bounds"] = r.bounds;
    j["slope"] = r.slope;
    j["intercept"] = r.intercept;
    csv = rate_csv(r);
  } else if (study == "audit") {
    cfg.require_only(c, {"study", "preset", "dgp", "counts", "contrast", "seed"}, "");
    const DgpSpec dgp = parse_dgp(cfg, get_object(c, "dgp", "dgp"), seed);
    const std::vector<int> counts = get_int_array(c, "counts", "counts");
    const GeneratedData data = generate(dgp);
    MatrixXd f;
    if (find(c, "contrast") != nullptr) {
      const json& rows = c.at("contrast");
      if (!rows.is_array() || rows.empty() || !rows[0].is_array()) throw InvalidInput("config field 'contrast' must be an array of rows");
      f.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].is_array() || rows[i].size() != rows[0].size()) throw InvalidInput("config field 'contrast' rows must have equal length");
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
          if (!rows[i][k].is_number()) throw InvalidInput("config field 'contrast' must hold numbers");
          f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k].get<double>();
        }
      }
    } else {
      f = ContrastMatrix::treatment_control().matrix();
    }
    const AuditResult a = exact_audit(data.table, counts, ContrastMatrix(f));
    const double err = std::max({(a.mean_estimate - a.truth).cwiseAbs().maxCoeff(),
                                 (a.estimate_covariance - a.oracle_covariance).cwiseAbs().maxCoeff(),
                                 (a.mean_vhat - a.expected_vhat).cwiseAbs().maxCoeff()});
    j = stamp(opt, cfg);
    j["study"] = study;
    j["support"] = a.support;
    j["truth"] = to_json(a.truth);
    j["mean_estimate"] = to_json(a.mean_estimate);
    j["estimate_covariance"] = to_json(a.estimate_covariance);
    j["oracle_covariance"] = to_json(a.oracle_covariance);
    j["mean_vhat"] = to_json(a.mean_vhat);
    j["expected_vhat"] = to_json(a.expected_vhat);
    j["max_abs_error"] = err;
    csv = key_value_csv(j, {"support", "max_abs_error"});
  } else {
    throw InvalidInput("unknown study '" + study + "' (expected repeated_sampling, rem_gain, rem_check, rate, audit)");
  }
  emit(opt, (opt.format.empty() ? "json" : opt.format) == std::string("csv") ? csv : j.dump(2));
  return 0;
}

int cmd_diagnose(const Options& opt) {
  RunConfig cfg = load_config(opt);
  cfg.require_only(cfg.values, {"eps", "workers", "seed", "reps"}, "");
  const json& c = cfg.values;
  if (opt.inputs.empty()) throw InvalidInput("diagnose needs at least one kernel CSV");
  std::vector<MatrixXd> ms;
  for (const auto& p : opt.inputs) ms.push_back(load_kernel_csv(p));
  const MultiKernel k(ms);
  const std::vector<double> eps = get_double_array(c, "eps", "eps", kDefaultEpsGrid);
  const long long draws = get_int(c, "reps", "reps", 0);
  if (draws != 0 && draws < 100) throw InvalidInput("reps must be 0 (no sampling) or >= 100");

  ojson j = stamp(opt, cfg);
  j["units"] = k.units();
  j["dims"] = k.dims();
  const MultiMoments mom = perm_stat_moments(k);
  j["mean"] = to_json(mom.mean);
  j["covariance"] = to_json(mom.covariance);
  ojson reports = ojson::array();
  for (const CltReport& r : clt_condition_report(k, eps)) {
    reports.push_back({{"variance", r.variance},
                       {"eps", r.eps},
                       {"lindeberg", r.lindeberg},
                       {"hoeffding3", r.hoeffding3},
                       {"hoeffding4", r.hoeffding4},
                       {"max_ratio", r.max_ratio}});
  }
  j["clt"] = reports;
  const MultiKernel normalized = normalize_kernel(k);
  j["normalization_error"] = normalization_error(normalized);
  j["bounds"] = {{"bolthausen", k.dims() == 1 ? ojson(bolthausen_bound(PermKernel(normalized[0]))) : ojson()},
                 {"multivariate", multivariate_bound(normalized)},
                 {"multivariate_conjectural", multivariate_bound_conjectural(normalized)}};
  j["omitted_constants"] = {{"bolthausen", "universal constant C"},
                            {"multivariate", "dimension-dependent constant C_H"},
                            {"multivariate_conjectural", "unproven H^{1/4} form; constant C"}};
  if (draws > 0) {
    if (k.dims() != 1) throw InvalidInput("Kolmogorov sampling is univariate; pass a single kernel");
    const KolmogorovEstimate e = empirical_kolmogorov(PermKernel(ms[0]), static_cast<std::size_t>(draws),
                                                      RngSeed{c.at("seed").get<std::uint64_t>(), 0},
                                                      static_cast<int>(get_int(c, "workers", "workers", 1)));
    j["kolmogorov"] = {{"distance", e.distance}, {"draws", e.draws}, {"mc_error", e.mc_error}};
  } else {
    j["kolmogorov"] = nullptr;
  }
  if ((opt.format.empty() ? "json" : opt.format) == std::string("csv")) {
    std::ostringstream os;
    os << "schema_version,coordinate,variance,max_ratio,hoeffding3,hoeffding4";
    for (double e : eps) os << ",lindeberg_" << e;
    os << '\n';
    for (std::size_t h = 0; h < reports.size(); ++h) {
      os << kSchemaVersion << ',' << h + 1 << ',' << reports[h]["variance"].dump() << ','
         << reports[h]["max_ratio"].dump() << ',' << reports[h]["hoeffding3"].dump() << ','
         << reports[h]["hoeffding4"].dump();
      for (const auto& v : reports[h]["lindeberg"]) os << ',' << v.dump();
      os << '\n';
    }
    emit(opt, os.str());
  } else {
    emit(opt, j.dump(2));
  }
  return 0;
}

}  // namespace randinf::cli
