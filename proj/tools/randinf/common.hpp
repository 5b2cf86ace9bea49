#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "randinf/science.hpp"

namespace randinf::cli {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  std::optional<double> alpha;
  std::optional<long long> reps;
  std::vector<std::string> inputs;
  std::string assignment_path;
};

// Config file merged with the command-line overrides (seed, alpha, reps).
struct RunConfig {
  json values = json::object();
  std::string base_dir;  // directory of the config file; relative paths resolve here

  // Rejects any key outside `allowed` under the object at `path`.
  void require_only(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) const;
  std::string hash() const;
};

RunConfig load_config(const Options& opt);

// Typed access with InvalidInput on type errors; `path` names the field in messages.
const json* find(const json& obj, const char* key);
double get_double(const json& obj, const char* key, const std::string& path, std::optional<double> fallback = {});
long long get_int(const json& obj, const char* key, const std::string& path, std::optional<long long> fallback = {});
bool get_bool(const json& obj, const char* key, const std::string& path, bool fallback);
std::string get_string(const json& obj, const char* key, const std::string& path,
                       std::optional<std::string> fallback = {});
std::vector<int> get_int_array(const json& obj, const char* key, const std::string& path);
std::vector<double> get_double_array(const json& obj, const char* key, const std::string& path,
                                     std::optional<std::vector<double>> fallback = {});
const json& get_object(const json& obj, const char* key, const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);
std::string file_hash(const std::string& path);
std::string resolve(const RunConfig& cfg, const std::string& path);

// Header plus string cells, all rows the header's width.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::string& path);
double parse_real(const CsvTable& t, std::size_t row, std::size_t col);
long long parse_integer(const CsvTable& t, std::size_t row, std::size_t col);

// Numeric matrix from every column of a headed CSV.
MatrixXd read_numeric_csv(const std::string& path);

struct Dataset {
  VectorXd y;
  std::optional<Assignment> assignment;  // absent when the file has no arm column
  std::optional<CovariateMatrix> covariates;
  std::vector<long long> unit_ids;
};

// outcome, [arm], [unit], x1..xK, at most one of stratum/pair/cluster.
Dataset read_dataset(const std::string& path, bool zero_one_arms, int arms_hint);

// Assignment from a design file (unit, arm, optional labels), joined to the
// dataset by unit id when both carry one, by row order otherwise.
Assignment join_assignment(const std::string& path, const Dataset& data, bool zero_one_arms, int arms_hint);

ojson stamp(const Options& opt, const RunConfig& cfg);

void emit(const Options& opt, const std::string& text);

// Infinite values serialize as "inf", the spelling configs accept.
ojson real_or_inf(double v);
ojson to_json(const VectorXd& v);
ojson to_json(const MatrixXd& m);
ojson to_json(const std::vector<double>& v);

}  // namespace randinf::cli
