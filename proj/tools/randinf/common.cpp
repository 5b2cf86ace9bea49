#include "common.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "randinf/errors.hpp"
#include "randinf/version.hpp"

namespace randinf::cli {
namespace {

std::string where(const CsvTable& t, std::size_t row, std::size_t col) {
  // Row numbers count the header as line 1.
  return t.path + ": line " + std::to_string(row + 2) + ", column '" + t.header[col] + "'";
}

bool is_missing(const std::string& cell) {
  std::string s;
  for (char c : cell) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s.empty() || s == "na" || s == "nan" || s == "null" || s == ".";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_covariate_name(const std::string& name) {
  return name.size() >= 2 && name[0] == 'x' &&
         std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

int map_arm(long long raw, bool zero_one, const std::string& at) {
  if (zero_one) {
    if (raw != 0 && raw != 1) throw InvalidInput(at + ": arm must be 0 or 1 with zero_one_arms");
    return raw == 0 ? kControlArm : kTreatedArm;
  }
  if (raw == 0) throw InvalidInput(at + ": arm 0 found; arms are 1-based (set zero_one_arms for 0/1 files)");
  if (raw < 1) throw InvalidInput(at + ": arm must be a positive integer");
  return static_cast<int>(raw);
}

struct LabelColumn {
  Structure kind = Structure::none;
  int col = -1;
};

LabelColumn label_column(const CsvTable& t) {
  LabelColumn out;
  const std::pair<const char*, Structure> kinds[] = {
      {"stratum", Structure::stratum}, {"pair", Structure::pair}, {"cluster", Structure::cluster}};
  for (const auto& [name, kind] : kinds) {
    const int c = t.column(name);
    if (c < 0) continue;
    if (out.col >= 0) throw InvalidInput(t.path + ": at most one of stratum, pair, cluster may be given");
    out = {kind, c};
  }
  return out;
}

Assignment build_assignment(std::vector<int> arms, int arms_hint, Structure kind, std::vector<int> labels) {
  int q = arms_hint;
  for (int a : arms) q = std::max(q, a);
  q = std::max(q, 2);
  return Assignment(std::move(arms), q, kind, std::move(labels));
}

}  // namespace

void RunConfig::require_only(const json& obj, std::initializer_list<const char*> allowed,
                             const std::string& path) const {
  if (!obj.is_object()) throw InvalidInput("config '" + path + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      std::string list;
      for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
      throw InvalidInput("unknown config field '" + (path.empty() ? key : path + "." + key) + "' (allowed: " + list + ")");
    }
  }
}

std::string RunConfig::hash() const { return "fnv1a64:" + hex64(fnv1a64(values.dump())); }

RunConfig load_config(const Options& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw std::runtime_error("cannot open config file " + opt.config_path);
    try {
      cfg.values = json::parse(in);
    } catch (const json::parse_error& e) {
      throw InvalidInput(opt.config_path + ": invalid JSON: " + e.what());
    }
    if (!cfg.values.is_object()) throw InvalidInput(opt.config_path + ": config must be a JSON object");
    cfg.base_dir = std::filesystem::path(opt.config_path).parent_path().string();
  }
  if (opt.seed) cfg.values["seed"] = *opt.seed;
  if (opt.alpha) cfg.values["alpha"] = *opt.alpha;
  if (opt.reps) cfg.values["reps"] = *opt.reps;
  if (!cfg.values.contains("seed")) cfg.values["seed"] = 0;
  return cfg;
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double get_double(const json& obj, const char* key, const std::string& path, std::optional<double> fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    throw InvalidInput("config field '" + path + "' is required");
  }
  if (v->is_string() && (v->get<std::string>() == "inf" || v->get<std::string>() == "infinity")) {
    return std::numeric_limits<double>::infinity();
  }
  if (!v->is_number()) throw InvalidInput("config field '" + path + "' must be a number");
  return v->get<double>();
}

long long get_int(const json& obj, const char* key, const std::string& path, std::optional<long long> fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    throw InvalidInput("config field '" + path + "' is required");
  }
  if (v->is_number_integer() || v->is_number_unsigned()) return v->get<long long>();
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (std::floor(d) == d && std::fabs(d) < 9e15) return static_cast<long long>(d);
  }
  throw InvalidInput("config field '" + path + "' must be an integer");
}

bool get_bool(const json& obj, const char* key, const std::string& path, bool fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) throw InvalidInput("config field '" + path + "' must be true or false");
  return v->get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& path, std::optional<std::string> fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    throw InvalidInput("config field '" + path + "' is required");
  }
  if (!v->is_string()) throw InvalidInput("config field '" + path + "' must be a string");
  return v->get<std::string>();
}

std::vector<int> get_int_array(const json& obj, const char* key, const std::string& path) {
  const json* v = find(obj, key);
  if (v == nullptr) throw InvalidInput("config field '" + path + "' is required");
  if (!v->is_array()) throw InvalidInput("config field '" + path + "' must be an array of integers");
  std::vector<int> out;
  for (const auto& e : *v) {
    if (!e.is_number_integer()) throw InvalidInput("config field '" + path + "' must be an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::vector<double> get_double_array(const json& obj, const char* key, const std::string& path,
                                     std::optional<std::vector<double>> fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    throw InvalidInput("config field '" + path + "' is required");
  }
  if (!v->is_array()) throw InvalidInput("config field '" + path + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) throw InvalidInput("config field '" + path + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

const json& get_object(const json& obj, const char* key, const std::string& path) {
  const json* v = find(obj, key);
  if (v == nullptr) throw InvalidInput("config field '" + path + "' is required");
  if (!v->is_object()) throw InvalidInput("config field '" + path + "' must be an object");
  return *v;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return "fnv1a64:" + hex64(fnv1a64(ss.str()));
}

std::string resolve(const RunConfig& cfg, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || cfg.base_dir.empty()) return path;
  return (std::filesystem::path(cfg.base_dir) / p).string();
}

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(l);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (t.header.empty()) {
      t.header = split(line);
      for (const auto& h : t.header) {
        if (h.empty()) throw InvalidInput(path + ": empty column name in header");
        if (std::count(t.header.begin(), t.header.end(), h) > 1) throw InvalidInput(path + ": duplicate column '" + h + "'");
      }
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw InvalidInput(path + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                         " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw InvalidInput(path + ": missing header row");
  return t;
}

double parse_real(const CsvTable& t, std::size_t row, std::size_t col) {
  const std::string& cell = t.rows[row][col];
  if (is_missing(cell)) {
    throw InvalidInput(where(t, row, col) + ": missing value (missing-data handling is not supported)");
  }
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
    throw InvalidInput(where(t, row, col) + ": not a finite decimal number: '" + cell + "'");
  }
  return v;
}

long long parse_integer(const CsvTable& t, std::size_t row, std::size_t col) {
  const std::string& cell = t.rows[row][col];
  if (is_missing(cell)) {
    throw InvalidInput(where(t, row, col) + ": missing value (missing-data handling is not supported)");
  }
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(cell.c_str(), &end, 10);
  if (end != cell.c_str() + cell.size() || errno == ERANGE) {
    throw InvalidInput(where(t, row, col) + ": not an integer: '" + cell + "'");
  }
  return v;
}

MatrixXd read_numeric_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.rows.empty()) throw InvalidInput(path + ": no data rows");
  MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_real(t, r, c);
  return m;
}

Dataset read_dataset(const std::string& path, bool zero_one_arms, int arms_hint) {
  const CsvTable t = read_csv(path);
  if (t.rows.empty()) throw InvalidInput(path + ": no data rows");
  const int y_col = t.column("outcome");
  if (y_col < 0) throw InvalidInput(path + ": required column 'outcome' is missing");
  const int arm_col = t.column("arm");
  const int unit_col = t.column("unit");
  const LabelColumn labels = label_column(t);
  std::vector<std::pair<int, std::string>> xcols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string& h = t.header[c];
    if (is_covariate_name(h)) {
      xcols.emplace_back(std::stoi(h.substr(1)), h);
    } else if (h != "outcome" && h != "arm" && h != "unit" && h != "stratum" && h != "pair" && h != "cluster") {
      throw InvalidInput(path + ": unknown column '" + h + "' (expected outcome, arm, unit, x1..xK, stratum, pair, cluster)");
    }
  }
  std::sort(xcols.begin(), xcols.end());
  for (std::size_t k = 0; k < xcols.size(); ++k) {
    if (xcols[k].first != static_cast<int>(k) + 1) throw InvalidInput(path + ": covariate columns must be x1..xK without gaps");
  }
  const auto n = t.rows.size();
  Dataset d;
  d.y.resize(static_cast<Eigen::Index>(n));
  std::vector<int> arms, labs;
  MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(xcols.size()));
  for (std::size_t r = 0; r < n; ++r) {
    d.y(static_cast<Eigen::Index>(r)) = parse_real(t, r, static_cast<std::size_t>(y_col));
    if (arm_col >= 0) {
      arms.push_back(map_arm(parse_integer(t, r, static_cast<std::size_t>(arm_col)), zero_one_arms,
                             where(t, r, static_cast<std::size_t>(arm_col))));
    }
    if (unit_col >= 0) d.unit_ids.push_back(parse_integer(t, r, static_cast<std::size_t>(unit_col)));
    if (labels.col >= 0) labs.push_back(static_cast<int>(parse_integer(t, r, static_cast<std::size_t>(labels.col))));
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          parse_real(t, r, static_cast<std::size_t>(t.column(xcols[k].second)));
    }
  }
  if (arm_col >= 0) {
    d.assignment = build_assignment(std::move(arms), arms_hint, labels.kind, std::move(labs));
  } else if (labels.col >= 0) {
    throw InvalidInput(path + ": structure labels given without an arm column");
  }
  if (!xcols.empty()) d.covariates.emplace(std::move(x));
  return d;
}

Assignment join_assignment(const std::string& path, const Dataset& data, bool zero_one_arms, int arms_hint) {
  const CsvTable t = read_csv(path);
  const int arm_col = t.column("arm");
  if (arm_col < 0) throw InvalidInput(path + ": required column 'arm' is missing");
  const int unit_col = t.column("unit");
  const LabelColumn labels = label_column(t);
  for (const auto& h : t.header) {
    if (h != "unit" && h != "arm" && h != "stratum" && h != "pair" && h != "cluster") {
      throw InvalidInput(path + ": unknown column '" + h + "' in assignment file");
    }
  }
  const auto n = static_cast<std::size_t>(data.y.size());
  if (t.rows.size() != n) {
    throw InvalidInput(path + ": assignment has " + std::to_string(t.rows.size()) + " rows, data has " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  if (unit_col >= 0 && !data.unit_ids.empty()) {
    std::map<long long, std::size_t> by_id;
    for (std::size_t r = 0; r < n; ++r) {
      const long long id = parse_integer(t, r, static_cast<std::size_t>(unit_col));
      if (!by_id.emplace(id, r).second) throw InvalidInput(path + ": duplicate unit id " + std::to_string(id));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = by_id.find(data.unit_ids[i]);
      if (it == by_id.end()) throw InvalidInput(path + ": no assignment for unit " + std::to_string(data.unit_ids[i]));
      order[i] = it->second;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  std::vector<int> arms, labs;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = order[i];
    arms.push_back(map_arm(parse_integer(t, r, static_cast<std::size_t>(arm_col)), zero_one_arms,
                           where(t, r, static_cast<std::size_t>(arm_col))));
    if (labels.col >= 0) labs.push_back(static_cast<int>(parse_integer(t, r, static_cast<std::size_t>(labels.col))));
  }
  return build_assignment(std::move(arms), arms_hint, labels.kind, std::move(labs));
}

ojson stamp(const Options& opt, const RunConfig& cfg) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = opt.command;
  j["version"] = std::string(kVersion);
  j["seed"] = cfg.values.at("seed");
  j["config_hash"] = cfg.hash();
  j["config"] = ojson::parse(cfg.values.dump());
  ojson inputs = ojson::array();
  for (const auto& p : opt.inputs) inputs.push_back({{"path", p}, {"hash", file_hash(p)}});
  if (!opt.assignment_path.empty()) inputs.push_back({{"path", opt.assignment_path}, {"hash", file_hash(opt.assignment_path)}});
  j["inputs"] = inputs;
  return j;
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(opt.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + opt.out);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw std::runtime_error("failed writing " + opt.out);
}

ojson real_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

ojson to_json(const VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ojson to_json(const MatrixXd& m) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

ojson to_json(const std::vector<double>& v) { return ojson(v); }

}  // namespace randinf::cli
