#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "hava/alignment.hpp"
#include "hava/junction.hpp"

namespace hava::testing {

/// Seeded generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  /// Reputation in [0, 1] with the endpoints drawn often.
  double reputation() {
    const double r = uniform(0.0, 1.0);
    if (r < 0.1) return 0.0;
    if (r < 0.2) return 1.0;
    return uniform(0.0, 1.0);
  }

  /// Positive alpha spread over several orders of magnitude, sometimes 0.
  double alpha() {
    if (coin(0.05)) return 0.0;
    return std::pow(10.0, uniform(-3.0, 2.0));
  }

  double tau() { return std::pow(10.0, uniform(-2.0, 2.0)); }

  double distance() {
    if (coin(0.1)) return 0.0;
    return std::pow(10.0, uniform(-3.0, 3.0));
  }

  /// Nonempty interval, possibly degenerate.
  Interval interval() {
    const double a = uniform(-100.0, 100.0);
    if (coin(0.1)) return {a, a};
    const double b = uniform(-100.0, 100.0);
    return {std::min(a, b), std::max(a, b)};
  }

  /// Nonempty subset of {0..n-1}.
  std::vector<ActionId> action_subset(std::size_t n) {
    std::vector<ActionId> out;
    for (ActionId a = 0; a < n; ++a) {
      if (coin()) out.push_back(a);
    }
    if (out.empty()) out.push_back(index(n));
    return out;
  }

  std::vector<double> sample(std::size_t n, double lo, double hi, bool integer_valued = false) {
    std::vector<double> v(n);
    for (auto& x : v) x = integer_valued ? std::round(uniform(lo, hi)) : uniform(lo, hi);
    return v;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hava_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::filesystem::path source_dir() { return HAVA_SOURCE_DIR; }

/// The scenario the shipped configs use.
inline junction::Scenario reference_scenario() {
  std::ifstream in(source_dir() / "configs" / "junction_scenario.json");
  return nlohmann::json::parse(in).get<junction::Scenario>();
}

inline junction::HumanDatasetConfig reference_humans() {
  std::ifstream in(source_dir() / "configs" / "humans.json");
  return nlohmann::json::parse(in).get<junction::HumanDatasetConfig>();
}

} // namespace hava::testing
