#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hava/alignment.hpp"
#include "hava/core_mdp.hpp"
#include "hava/grid_world.hpp"
#include "hava/junction.hpp"
#include "hava/q_learning.hpp"
#include "hava/speed_envelope.hpp"

namespace hava {

/// Which norm sources an agent is judged by.
enum class Variant { kHava, kRbOnly, kDdOnly };

inline Variant parse_variant(const std::string& s) {
  if (s == "hava") return Variant::kHava;
  if (s == "rb-only") return Variant::kRbOnly;
  if (s == "dd-only") return Variant::kDdOnly;
  throw std::invalid_argument("unknown variant '" + s + "' (hava | rb-only | dd-only)");
}

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kHava: return "hava";
    case Variant::kRbOnly: return "rb-only";
    case Variant::kDdOnly: return "dd-only";
  }
  return "?";
}

// State keys ----------------------------------------------------------------------

/// (cell index, reputation bucket).
inline rl::StateKeyFn grid_state_key(const grid::GridWorld& g,
                                     std::size_t buckets = rl::kReputationBuckets) {
  const auto width = static_cast<std::uint64_t>(g.width());
  return [width, buckets](const EnvState& s, double w) {
    const grid::Cell c = grid::GridWorld::cell_of(s);
    const std::uint64_t cell = static_cast<std::uint64_t>(c.y) * width + static_cast<std::uint64_t>(c.x);
    return cell * buckets + rl::reputation_bucket(w, buckets);
  };
}

/// (2 m position bucket, speed bucket of at least 1 km/h, junction phase,
/// reputation bucket), packed into one integer.
inline rl::StateKeyFn junction_state_key(const junction::Scenario& sc,
                                         std::size_t buckets = rl::kReputationBuckets) {
  const double spacing = sc.reward_spacing_m;
  const double inc = std::max(sc.action_increment_kmh, 1.0);
  const auto speed_buckets =
      static_cast<std::uint64_t>(std::ceil(sc.vehicle_max_speed_kmh / inc)) + 1;
  return [sc, spacing, inc, speed_buckets, buckets](const EnvState& s, double w) {
    const double x = std::max(0.0, s.obs[junction::kObsPosition]);
    const auto pos = static_cast<std::uint64_t>(x / spacing);
    const auto speed = std::min<std::uint64_t>(
        static_cast<std::uint64_t>(std::llround(s.obs[junction::kObsSpeed] / inc)), speed_buckets - 1);
    const auto phase =
        static_cast<std::uint64_t>(junction::junction_phase(sc, junction::from_env_state(s)));
    return ((pos * speed_buckets + speed) * 3 + phase) * buckets + rl::reputation_bucket(w, buckets);
  };
}

// Alignment Values --------------------------------------------------------------

inline AlignmentValue junction_alignment_value(const junction::Scenario& sc,
                                               const dd::SpeedEnvelopeModel* model, Variant v,
                                               double tau, double alpha) {
  AlignmentValue av;
  av.tau = tau;
  av.alpha = alpha;
  if (v != Variant::kDdOnly) {
    av.rb = [sc](const EnvState& s) { return junction::junction_rb(sc, junction::from_env_state(s)); };
  }
  if (v != Variant::kRbOnly) {
    if (model == nullptr) throw std::invalid_argument("variant " + variant_name(v) + " needs a DD model");
    av.dd = dd::as_norm(*model);
  }
  return av;
}

// Junction training run ------------------------------------------------------------

/// Which trajectories stand for a trained agent: greedy rollouts of the
/// table taken at `policies` evenly spaced points of the last `window`
/// training episodes.
struct EvalProtocol {
  std::size_t window = 500;
  std::size_t policies = 2;
};

inline void to_json(nlohmann::json& j, const EvalProtocol& e) {
  j = {{"window", e.window}, {"policies", e.policies}};
}

inline void from_json(const nlohmann::json& j, EvalProtocol& e) {
  const EvalProtocol d;
  e.window = j.value("window", d.window);
  e.policies = j.value("policies", d.policies);
}

/// Episodes after which a greedy snapshot is taken.
inline std::vector<std::size_t> snapshot_episodes(std::size_t episodes, const EvalProtocol& p) {
  std::vector<std::size_t> out;
  if (episodes == 0 || p.policies == 0) return out;
  const std::size_t window = std::min(p.window, episodes);
  const std::size_t first = episodes - window;
  for (std::size_t k = 1; k <= p.policies; ++k) {
    const std::size_t end = first + (k * window) / p.policies;
    if (end == 0) continue;
    if (out.empty() || out.back() != end - 1) out.push_back(end - 1);
  }
  return out;
}

struct JunctionRun {
  rl::TrainResult training;
  Trajectory greedy;                  // greedy rollout of the final table
  std::vector<Trajectory> snapshots;  // per EvalProtocol
};

inline JunctionRun run_junction(const junction::Scenario& sc, const dd::SpeedEnvelopeModel* model,
                                Variant variant, double tau, double alpha, double gamma,
                                const rl::TrainConfig& cfg, const EvalProtocol& protocol = {}) {
  auto env = wrap(junction::JunctionSim(sc), junction_alignment_value(sc, model, variant, tau, alpha),
                  gamma);
  const auto key = junction_state_key(sc, cfg.reputation_buckets);
  auto eval_env = env;
  JunctionRun run;
  const auto marks = snapshot_episodes(cfg.episodes, protocol);
  std::size_t next = 0;
  auto on_episode = [&](std::size_t ep, const Trajectory&, const rl::QTable& q) {
    if (next < marks.size() && marks[next] == ep) {
      run.snapshots.push_back(rollout(rl::greedy_policy(q, key), eval_env, cfg.max_steps));
      ++next;
    }
  };
  run.training = rl::train(env, cfg, key, on_episode);
  run.greedy = rollout(rl::greedy_policy(run.training.q, key), eval_env, cfg.max_steps);
  return run;
}

} // namespace hava
