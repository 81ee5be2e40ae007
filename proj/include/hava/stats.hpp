#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hava/core_mdp.hpp"
#include "hava/junction.hpp"

namespace hava::stats {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

inline void to_json(nlohmann::json& j, const KsResult& r) {
  j = {{"statistic", r.statistic}, {"p_value", r.p_value}, {"n", r.n}, {"m", r.m}};
}

/// P(K > lambda) for the Kolmogorov distribution. Uses the theta-function
/// form for small lambda, where the alternating series converges slowly.
inline double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double kEps = 1e-12;
  double p;
  if (lambda < 1.0) {
    const double pi = std::numbers::pi;
    double sum = 0.0;
    for (int j = 1; j < 1000; ++j) {
      const double k = 2.0 * j - 1.0;
      const double term = std::exp(-k * k * pi * pi / (8.0 * lambda * lambda));
      sum += term;
      if (term < kEps) break;
    }
    p = 1.0 - std::sqrt(2.0 * pi) / lambda * sum;
  } else {
    double sum = 0.0;
    for (int j = 1; j < 1000; ++j) {
      const double term = std::exp(-2.0 * j * j * lambda * lambda);
      sum += (j % 2 == 1) ? term : -term;
      if (term < kEps) break;
    }
    p = 2.0 * sum;
  }
  return std::clamp(p, 0.0, 1.0);
}

/// sup |F_a - F_b| over the pooled sample points.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

/// Two-sample KS test with the asymptotic p-value at effective size nm/(n+m).
inline KsResult ks_2samp(const std::vector<double>& a, const std::vector<double>& b) {
  KsResult r;
  r.statistic = ks_statistic(a, b);
  r.n = a.size();
  r.m = b.size();
  const double ne = static_cast<double>(r.n) * static_cast<double>(r.m) /
                    static_cast<double>(r.n + r.m);
  r.p_value = kolmogorov_survival(std::sqrt(ne) * r.statistic);
  return r;
}

// Trajectory features ------------------------------------------------------------

enum class Feature { kFinishTime, kSpeedProfile };

inline Feature parse_feature(const std::string& s) {
  if (s == "finish_time") return Feature::kFinishTime;
  if (s == "speed_profile") return Feature::kSpeedProfile;
  throw std::invalid_argument("unknown feature '" + s + "' (finish_time | speed_profile)");
}

inline std::string feature_name(Feature f) {
  return f == Feature::kFinishTime ? "finish_time" : "speed_profile";
}

inline std::vector<double> feature_sample(const std::vector<Trajectory>& ts, Feature f) {
  std::vector<double> out;
  for (const auto& t : ts) {
    if (f == Feature::kFinishTime) {
      out.push_back(junction::finish_time(t));
    } else {
      const auto v = junction::speed_series(t);
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  return out;
}

/// KS test of the agent's feature distribution against the human dataset.
inline KsResult align_test(const std::vector<Trajectory>& agent, const std::vector<Trajectory>& humans,
                           Feature f) {
  if (agent.size() < 2) throw std::invalid_argument("align_test: need at least 2 agent trajectories");
  return ks_2samp(feature_sample(agent, f), feature_sample(humans, f));
}

inline bool value_aligned(const KsResult& r, double significance = 0.05) {
  return r.p_value > significance;
}

// Envelope violations --------------------------------------------------------------

struct ViolationStats {
  double median = 0.0;
  double mean = 0.0;
  std::size_t ticks = 0;  // aligned ticks per trajectory
  std::size_t samples = 0;
};

inline void to_json(nlohmann::json& j, const ViolationStats& v) {
  j = {{"median_kmh", v.median}, {"mean_kmh", v.mean}, {"aligned_ticks", v.ticks},
       {"samples", v.samples}};
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Per-tick distance of agent speeds to the band spanned by the human speeds
/// at the same tick, over the first T ticks where T is the shortest
/// trajectory length among all inputs.
inline ViolationStats violation_stats(const std::vector<std::vector<double>>& agent_speeds,
                                      const std::vector<std::vector<double>>& human_speeds) {
  if (agent_speeds.empty() || human_speeds.empty()) {
    throw std::invalid_argument("violation_stats: empty input");
  }
  std::size_t ticks = agent_speeds.front().size();
  for (const auto& v : agent_speeds) ticks = std::min(ticks, v.size());
  for (const auto& v : human_speeds) ticks = std::min(ticks, v.size());
  if (ticks == 0) throw std::invalid_argument("violation_stats: empty trajectory");

  std::vector<double> lo(ticks), hi(ticks);
  for (std::size_t t = 0; t < ticks; ++t) {
    lo[t] = hi[t] = human_speeds.front()[t];
    for (const auto& h : human_speeds) {
      lo[t] = std::min(lo[t], h[t]);
      hi[t] = std::max(hi[t], h[t]);
    }
  }
  std::vector<double> dist;
  dist.reserve(ticks * agent_speeds.size());
  for (const auto& a : agent_speeds) {
    for (std::size_t t = 0; t < ticks; ++t) {
      dist.push_back(a[t] < lo[t] ? lo[t] - a[t] : (a[t] > hi[t] ? a[t] - hi[t] : 0.0));
    }
  }
  ViolationStats s;
  s.ticks = ticks;
  s.samples = dist.size();
  s.median = median_of(dist);
  double sum = 0.0;
  for (double d : dist) sum += d;
  s.mean = sum / static_cast<double>(dist.size());
  return s;
}

inline ViolationStats violation_stats(const std::vector<Trajectory>& agent,
                                      const std::vector<Trajectory>& humans) {
  std::vector<std::vector<double>> a, h;
  for (const auto& t : agent) a.push_back(junction::speed_series(t));
  for (const auto& t : humans) h.push_back(junction::speed_series(t));
  return violation_stats(a, h);
}

} // namespace hava::stats
