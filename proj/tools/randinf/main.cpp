#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "randinf/errors.hpp"
#include "randinf/version.hpp"

namespace {

using randinf::cli::Options;

CLI::App* add_command(CLI::App& app, Options& opt, const char* name, const char* help, bool inputs, bool sampling) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", opt.seed, "random seed (overrides the config)");
  sub->add_option("--out", opt.out, "output file (default stdout)");
  sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"json", "csv"}));
  if (sampling) {
    sub->add_option("--alpha", opt.alpha, "significance level");
    sub->add_option("--reps", opt.reps, "Monte Carlo repetitions");
  }
  if (inputs) sub->add_option("inputs", opt.inputs, "input CSV files")->required();
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-based inference for randomized experiments"};
  app.set_version_flag("--version", std::string(randinf::kVersion));
  app.require_subcommand(1);
  Options opt;

  CLI::App* design = add_command(app, opt, "design", "draw an assignment", false, false);
  design->add_option("covariates", opt.inputs, "covariate CSV (ReM)");
  CLI::App* analyze = add_command(app, opt, "analyze", "estimate a contrast with a confidence interval", true, true);
  analyze->add_option("--assignment", opt.assignment_path, "assignment CSV from `randinf design`")
      ->check(CLI::ExistingFile);
  CLI::App* frt = add_command(app, opt, "frt", "Fisher randomization test", true, true);
  frt->add_option("--assignment", opt.assignment_path, "assignment CSV from `randinf design`")->check(CLI::ExistingFile);
  CLI::App* simulate = add_command(app, opt, "simulate", "simulation studies", false, true);
  CLI::App* diagnose = add_command(app, opt, "diagnose", "permutation CLT diagnostics for kernel CSVs", true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (CLI::App* sub : app.get_subcommands()) opt.command = sub->get_name();

  try {
    if (design->parsed()) return randinf::cli::cmd_design(opt);
    if (analyze->parsed()) return randinf::cli::cmd_analyze(opt);
    if (frt->parsed()) return randinf::cli::cmd_frt(opt);
    if (simulate->parsed()) return randinf::cli::cmd_simulate(opt);
    if (diagnose->parsed()) return randinf::cli::cmd_diagnose(opt);
  } catch (const randinf::Infeasible& e) {
    std::cerr << "randinf: infeasible: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "randinf: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "randinf: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "randinf: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
