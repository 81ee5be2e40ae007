#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hava/experiment.hpp"
#include "hava/junction.hpp"
#include "hava/q_learning.hpp"

namespace hava {

namespace fs = std::filesystem;

/// Raised for malformed or inconsistent configuration files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 1-based line and column of a byte offset in `text`.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

/// Parses JSON, reporting syntax errors as "path:line:column: message".
inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, col] = line_column(text, at);
    std::string what = e.what();
    if (const auto p = what.find("parse error"); p != std::string::npos) what = what.substr(p);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_json_text(text, path.string());
}

enum class EnvKind { kGrid, kJunction };

/// One experiment. Relative paths are resolved against the directory of the
/// file the config was read from.
struct RunConfig {
  std::string experiment = "run";
  EnvKind environment = EnvKind::kJunction;
  Variant variant = Variant::kHava;
  double tau = 1.0;
  double alpha = 1.0;
  double gamma = kDefaultDiscount;
  rl::TrainConfig train;
  EvalProtocol eval;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t seed = 1;  // dataset generation and single-seed commands

  // junction
  std::optional<junction::Scenario> scenario;
  std::optional<junction::HumanDatasetConfig> humans;
  fs::path dataset;   // directory holding trajectories/*.csv from gen-humans
  fs::path dd_model;  // dd_model.json

  // grid
  fs::path grid_map;
  fs::path reference_policies;
  std::vector<double> alphas;

  // reputation-trace
  std::size_t trace_steps = 60;
  std::vector<std::size_t> violation_steps{0};

  fs::path out = "out";
  fs::path base_dir = ".";

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
  fs::path out_dir() const { return resolve(out); }
  fs::path dd_model_path() const {
    return dd_model.empty() ? resolve(dataset) / "dd_model.json" : resolve(dd_model);
  }
  bool needs_dd() const { return variant != Variant::kRbOnly; }

  void validate() const {
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
    for (double a : alphas) {
      if (!(a >= 0.0)) throw ConfigError("alphas must be >= 0");
    }
    if (environment == EnvKind::kJunction) {
      if (!(tau > 0.0)) throw ConfigError("tau must be > 0 for the junction");
      if (seeds.empty()) throw ConfigError("seeds must not be empty");
      if (scenario) scenario->validate();
    }
  }
};

namespace detail {

template <class T>
T section(const nlohmann::json& j, const char* key, const std::string& origin) {
  try {
    return j.at(key).get<T>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": field '" + key + "': " + e.what());
  }
}

/// An inline object, or a path (relative to `base`) to a JSON file holding one.
inline nlohmann::json inline_or_file(const nlohmann::json& v, const fs::path& base) {
  if (v.is_string()) {
    const fs::path p = v.get<std::string>();
    return read_json_file(p.is_absolute() ? p : base / p);
  }
  return v;
}

} // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir,
                                      const std::string& origin) {
  if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");
  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.experiment = j.value("experiment", c.experiment);
    const std::string env = j.value("environment", std::string("junction"));
    if (env == "grid") {
      c.environment = EnvKind::kGrid;
    } else if (env == "junction") {
      c.environment = EnvKind::kJunction;
    } else {
      throw ConfigError("environment must be 'grid' or 'junction', got '" + env + "'");
    }
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    c.tau = j.value("tau", c.tau);
    c.alpha = j.value("alpha", c.alpha);
    c.gamma = j.value("gamma", c.gamma);
    if (j.contains("train")) c.train = detail::section<rl::TrainConfig>(j, "train", origin);
    if (j.contains("eval")) c.eval = detail::section<EvalProtocol>(j, "eval", origin);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.seed = j.value("seed", c.seed);
    if (j.contains("scenario")) {
      c.scenario = detail::inline_or_file(j.at("scenario"), base_dir).get<junction::Scenario>();
    }
    if (j.contains("humans")) {
      c.humans =
          detail::inline_or_file(j.at("humans"), base_dir).get<junction::HumanDatasetConfig>();
    }
    c.dataset = j.value("dataset", std::string());
    c.dd_model = j.value("dd_model", std::string());
    c.grid_map = j.value("grid_map", std::string());
    c.reference_policies = j.value("reference_policies", std::string());
    if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
    c.trace_steps = j.value("trace_steps", c.trace_steps);
    if (j.contains("violation_steps")) {
      c.violation_steps = j.at("violation_steps").get<std::vector<std::size_t>>();
    }
    c.out = j.value("out", std::string("out"));
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(origin, 0) == 0) throw;
    throw ConfigError(origin + ": " + what);
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  const nlohmann::json j = read_json_file(path);
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return run_config_from_json(j, base, path.string());
}

/// Writes `j` pretty-printed, creating parent directories.
inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

} // namespace hava
