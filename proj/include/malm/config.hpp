#pragma once

#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "malm/catalog.hpp"
#include "malm/error.hpp"
#include "malm/problem.hpp"

namespace malm::config {

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; a repeated key is an error.
inline std::map<std::string, std::string> parse_key_values(std::istream& in,
                                                           const std::string& source = "config") {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, std::move(value)).second) {
      fail(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

inline std::map<std::string, std::string> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open '" + path + "'");
  return parse_key_values(in, path);
}

inline double parse_real(std::string_view text, std::string_view key) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    fail(ErrorCode::ConfigError, "invalid number '" + s + "' for " + std::string(key));
  }
  return v;
}

inline int parse_int(std::string_view text, std::string_view key) {
  const std::string s(text);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || v < INT_MIN || v > INT_MAX) {
    fail(ErrorCode::ConfigError, "invalid integer '" + s + "' for " + std::string(key));
  }
  return static_cast<int>(v);
}

/// Splits on commas and whitespace.
inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline Vector parse_vector(std::string_view text, std::string_view key) {
  const auto items = split_list(text);
  Vector v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_real(items[i], key);
  return v;
}

/// QP data file: keys n, m, Q (row-major n*n), q (n), A (row-major m*n), b (m).
inline QpData parse_qp_data(const std::map<std::string, std::string>& kv, const std::string& source) {
  for (const auto& [key, value] : kv) {
    if (key != "n" && key != "m" && key != "Q" && key != "q" && key != "A" && key != "b") {
      fail(ErrorCode::ConfigError, source + ": unknown key '" + key + "'");
    }
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorCode::ConfigError, source + ": missing key '" + key + "'");
    return it->second;
  };
  const int n = parse_int(get("n"), "n");
  const int m = parse_int(get("m"), "m");
  if (n <= 0 || m < 0) fail(ErrorCode::ConfigError, source + ": need n > 0 and m >= 0");

  auto sized = [&](const char* key, Eigen::Index count) {
    Vector v = parse_vector(get(key), key);
    if (v.size() != count) {
      fail(ErrorCode::ConfigError, source + ": '" + key + "' has " + std::to_string(v.size()) +
                                       " entries, expected " + std::to_string(count));
    }
    return v;
  };
  QpData d;
  const Vector qv = sized("Q", Eigen::Index{n} * n);
  const Vector av = sized("A", Eigen::Index{m} * n);
  d.Q = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(qv.data(), n, n);
  d.A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(av.data(), m, n);
  d.q = sized("q", n);
  d.b = sized("b", m);
  validate_shapes(d);
  return d;
}

inline QpData load_qp_file(const std::string& path) {
  return parse_qp_data(read_key_value_file(path), path);
}

/// Catalog name, or else a path to a QP data file.
inline NlpProblem resolve_problem(const std::string& name_or_path) {
  for (auto name : kCatalogNames) {
    if (name == name_or_path) return catalog(name);
  }
  std::error_code ec;
  if (!name_or_path.empty() && std::filesystem::is_regular_file(name_or_path, ec)) {
    return make_qp_problem(load_qp_file(name_or_path),
                           std::filesystem::path(name_or_path).stem().string());
  }
  fail(ErrorCode::UnknownProblem, "unknown problem '" + name_or_path + "'");
}

enum class MethodChoice { Alm, Malm, MalmRoot, Penalty };

inline MethodChoice parse_method(std::string_view s) {
  if (s == "alm") return MethodChoice::Alm;
  if (s == "malm") return MethodChoice::Malm;
  if (s == "malm-root") return MethodChoice::MalmRoot;
  if (s == "penalty") return MethodChoice::Penalty;
  fail(ErrorCode::ConfigError, "unknown method '" + std::string(s) + "' (alm, malm, malm-root, penalty)");
}

inline std::string_view method_name(MethodChoice m) {
  switch (m) {
    case MethodChoice::Alm: return "alm";
    case MethodChoice::Malm: return "malm";
    case MethodChoice::MalmRoot: return "malm-root";
    case MethodChoice::Penalty: return "penalty";
  }
  return "?";
}

struct RunConfig {
  std::string problem;
  MethodChoice method = MethodChoice::Malm;
  std::vector<MethodChoice> methods{MethodChoice::Penalty, MethodChoice::Malm};
  double omega = 0.1;
  double omega_e = 0.0;
  std::optional<Vector> x0;
  std::optional<Vector> lambda0;
  double outer_tol = 1e-8;
  int max_outer = 50;
  std::optional<double> inner_grad_tol;
  std::optional<int> inner_max_iters;
  bool warm_start = true;
  std::vector<double> schedule;
  std::string output_path;
};

inline bool parse_bool(std::string_view s, std::string_view key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorCode::ConfigError, "invalid boolean '" + std::string(s) + "' for " + std::string(key));
}

/// Applies one setting. Unknown keys are a hard error.
inline void apply_setting(RunConfig& rc, const std::string& key, const std::string& value) {
  if (key == "problem") {
    rc.problem = value;
  } else if (key == "method") {
    rc.method = parse_method(value);
  } else if (key == "methods") {
    rc.methods.clear();
    for (const auto& item : split_list(value)) rc.methods.push_back(parse_method(item));
  } else if (key == "omega") {
    rc.omega = parse_real(value, key);
  } else if (key == "omega_e") {
    rc.omega_e = parse_real(value, key);
  } else if (key == "x0") {
    rc.x0 = parse_vector(value, key);
  } else if (key == "lambda0") {
    rc.lambda0 = parse_vector(value, key);
  } else if (key == "outer_tol") {
    rc.outer_tol = parse_real(value, key);
  } else if (key == "max_outer") {
    rc.max_outer = parse_int(value, key);
  } else if (key == "inner_grad_tol") {
    rc.inner_grad_tol = parse_real(value, key);
  } else if (key == "inner_max_iters") {
    rc.inner_max_iters = parse_int(value, key);
  } else if (key == "warm_start") {
    rc.warm_start = parse_bool(value, key);
  } else if (key == "schedule") {
    rc.schedule.clear();
    for (const auto& item : split_list(value)) rc.schedule.push_back(parse_real(item, key));
  } else if (key == "out") {
    rc.output_path = value;
  } else {
    fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  }
}

/// File settings first, then flag settings; flags win.
inline RunConfig build_run_config(const std::map<std::string, std::string>& file_settings,
                                  const std::vector<std::pair<std::string, std::string>>& flag_settings) {
  RunConfig rc;
  for (const auto& [k, v] : file_settings) apply_setting(rc, k, v);
  for (const auto& [k, v] : flag_settings) apply_setting(rc, k, v);
  return rc;
}

}  // namespace malm::config
