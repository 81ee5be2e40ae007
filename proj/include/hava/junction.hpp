#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hava/alignment.hpp"
#include "hava/core_mdp.hpp"

namespace hava::junction {

inline constexpr double kKmhPerMps = 3.6;
inline constexpr std::size_t kActionCount = 11;
inline constexpr std::size_t kHoldAction = 5;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Priority traffic on the north-south road, modelled as one platoon moving
/// at constant speed. Positions are of the platoon head, measured from the
/// entry of its conflict zone (negative while approaching).
struct CrossingSchedule {
  double spawn_tick = 0.0;
  double start_distance_m = 60.0;
  double speed_kmh = 30.0;
  double platoon_length_m = 40.0;
};

/// Road geometry and simulation constants. Ego positions are meters along
/// the west-east route; the stop line sits at `junction_position_m` and the
/// conflict zone spans `junction_length_m` past it.
struct Scenario {
  double tick_s = 0.1;
  double route_length_m = 132.0;
  double junction_position_m = 70.0;
  double junction_length_m = 6.0;
  double speed_limit_kmh = 50.0;
  double vehicle_max_speed_kmh = 60.0;
  double decel_mps2 = 2.6;
  double action_increment_kmh = 1.0;
  double gap_margin_s = 1.0;
  double reward_spacing_m = 2.0;
  std::size_t horizon_ticks = 400;
  CrossingSchedule crossing;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("junction scenario: ") + what);
    };
    require(tick_s > 0, "tick_s must be > 0");
    require(junction_position_m > 0, "junction_position_m must be > 0");
    require(junction_length_m > 0, "junction_length_m must be > 0");
    require(route_length_m > junction_position_m + junction_length_m,
            "route must extend past the junction");
    require(speed_limit_kmh > 0 && vehicle_max_speed_kmh >= speed_limit_kmh,
            "need 0 < speed limit <= vehicle max speed");
    require(decel_mps2 > 0, "decel_mps2 must be > 0");
    require(action_increment_kmh > 0, "action_increment_kmh must be > 0");
    require(gap_margin_s >= 0, "gap_margin_s must be >= 0");
    require(reward_spacing_m > 0, "reward_spacing_m must be > 0");
    require(horizon_ticks > 0, "horizon_ticks must be > 0");
    require(crossing.speed_kmh > 0, "crossing speed must be > 0");
    require(crossing.platoon_length_m >= 0, "platoon length must be >= 0");
    require(crossing.start_distance_m >= 0, "crossing start distance must be >= 0");
    require(crossing.spawn_tick >= 0, "crossing spawn tick must be >= 0");
  }
};

inline void to_json(nlohmann::json& j, const CrossingSchedule& c) {
  j = {{"spawn_tick", c.spawn_tick},
       {"start_distance_m", c.start_distance_m},
       {"speed_kmh", c.speed_kmh},
       {"platoon_length_m", c.platoon_length_m}};
}

inline void from_json(const nlohmann::json& j, CrossingSchedule& c) {
  const CrossingSchedule d;
  c.spawn_tick = j.value("spawn_tick", d.spawn_tick);
  c.start_distance_m = j.value("start_distance_m", d.start_distance_m);
  c.speed_kmh = j.value("speed_kmh", d.speed_kmh);
  c.platoon_length_m = j.value("platoon_length_m", d.platoon_length_m);
}

inline void to_json(nlohmann::json& j, const Scenario& s) {
  j = {{"tick_s", s.tick_s},
       {"route_length_m", s.route_length_m},
       {"junction_position_m", s.junction_position_m},
       {"junction_length_m", s.junction_length_m},
       {"speed_limit_kmh", s.speed_limit_kmh},
       {"vehicle_max_speed_kmh", s.vehicle_max_speed_kmh},
       {"decel_mps2", s.decel_mps2},
       {"action_increment_kmh", s.action_increment_kmh},
       {"gap_margin_s", s.gap_margin_s},
       {"reward_spacing_m", s.reward_spacing_m},
       {"horizon_ticks", s.horizon_ticks},
       {"crossing", s.crossing}};
}

inline void from_json(const nlohmann::json& j, Scenario& s) {
  const Scenario d;
  s.tick_s = j.value("tick_s", d.tick_s);
  s.route_length_m = j.value("route_length_m", d.route_length_m);
  s.junction_position_m = j.value("junction_position_m", d.junction_position_m);
  s.junction_length_m = j.value("junction_length_m", d.junction_length_m);
  s.speed_limit_kmh = j.value("speed_limit_kmh", d.speed_limit_kmh);
  s.vehicle_max_speed_kmh = j.value("vehicle_max_speed_kmh", d.vehicle_max_speed_kmh);
  s.decel_mps2 = j.value("decel_mps2", d.decel_mps2);
  s.action_increment_kmh = j.value("action_increment_kmh", d.action_increment_kmh);
  s.gap_margin_s = j.value("gap_margin_s", d.gap_margin_s);
  s.reward_spacing_m = j.value("reward_spacing_m", d.reward_spacing_m);
  s.horizon_ticks = j.value("horizon_ticks", d.horizon_ticks);
  s.crossing = j.value("crossing", d.crossing);
  s.validate();
}

// State ----------------------------------------------------------------------

struct JunctionState {
  double ego_position_m = 0.0;
  double ego_speed_kmh = 0.0;
  double distance_to_junction_m = 0.0;
  double crossing_position_m = 0.0;
  double crossing_speed_kmh = 0.0;
  bool junction_occupied = false;
  std::size_t time_step = 0;
  bool crossing_cleared = false;
};

/// Column order of junction observations.
inline const std::vector<std::string>& state_columns() {
  static const std::vector<std::string> names{
      "ego_position_m",      "ego_speed_kmh",      "distance_to_junction_m",
      "crossing_position_m", "crossing_speed_kmh", "junction_occupied",
      "time_step",           "crossing_cleared"};
  return names;
}

enum ObsIndex : std::size_t {
  kObsPosition = 0,
  kObsSpeed = 1,
  kObsDistance = 2,
  kObsCrossingPosition = 3,
  kObsCrossingSpeed = 4,
  kObsOccupied = 5,
  kObsTick = 6,
  kObsCleared = 7,
  kObsWidth = 8
};

inline EnvState to_env_state(const JunctionState& s, bool terminal) {
  return EnvState{{s.ego_position_m, s.ego_speed_kmh, s.distance_to_junction_m,
                   s.crossing_position_m, s.crossing_speed_kmh,
                   s.junction_occupied ? 1.0 : 0.0, static_cast<double>(s.time_step),
                   s.crossing_cleared ? 1.0 : 0.0},
                  terminal};
}

inline JunctionState from_env_state(const EnvState& e) {
  if (e.obs.size() != kObsWidth) throw std::invalid_argument("junction: bad observation width");
  JunctionState s;
  s.ego_position_m = e.obs[kObsPosition];
  s.ego_speed_kmh = e.obs[kObsSpeed];
  s.distance_to_junction_m = e.obs[kObsDistance];
  s.crossing_position_m = e.obs[kObsCrossingPosition];
  s.crossing_speed_kmh = e.obs[kObsCrossingSpeed];
  s.junction_occupied = e.obs[kObsOccupied] != 0.0;
  s.time_step = static_cast<std::size_t>(e.obs[kObsTick]);
  s.crossing_cleared = e.obs[kObsCleared] != 0.0;
  return s;
}

// Priority traffic -------------------------------------------------------------

inline double crossing_head_position(const Scenario& sc, std::size_t tick) {
  const double moving_ticks = std::max(0.0, static_cast<double>(tick) - sc.crossing.spawn_tick);
  return -sc.crossing.start_distance_m +
         moving_ticks * sc.tick_s * sc.crossing.speed_kmh / kKmhPerMps;
}

inline bool crossing_in_zone(const Scenario& sc, double head) {
  return head > 0.0 && head - sc.crossing.platoon_length_m < sc.junction_length_m;
}

inline bool crossing_has_cleared(const Scenario& sc, double head) {
  return head - sc.crossing.platoon_length_m >= sc.junction_length_m;
}

/// Seconds until the platoon head enters the conflict zone; 0 while it is
/// inside, +inf once it has cleared.
inline double crossing_time_to_arrival(const Scenario& sc, const JunctionState& s) {
  if (s.crossing_cleared || crossing_has_cleared(sc, s.crossing_position_m)) return kInf;
  if (s.crossing_position_m > 0.0) return 0.0;
  const double v = sc.crossing.speed_kmh / kKmhPerMps;
  const double wait_ticks = std::max(0.0, sc.crossing.spawn_tick - static_cast<double>(s.time_step));
  return wait_ticks * sc.tick_s + (-s.crossing_position_m) / v;
}

inline bool ego_in_zone(const Scenario& sc, double ego_position) {
  return ego_position > sc.junction_position_m &&
         ego_position < sc.junction_position_m + sc.junction_length_m;
}

// Rule-based norms -------------------------------------------------------------

/// Highest speed (km/h) from which the ego still stops within `gap_m`,
/// allowing one tick of reaction at constant speed before braking at
/// `decel_mps2`: v * tick + v^2 / (2 b) <= gap.
inline double braking_safe_speed(const Scenario& sc, double gap_m) {
  if (gap_m <= 0.0) return 0.0;
  const double b = sc.decel_mps2;
  const double dt = sc.tick_s;
  const double v = b * (-dt + std::sqrt(dt * dt + 2.0 * gap_m / b));
  // keep x + v*dt strictly behind the stop line despite rounding
  return std::max(0.0, v * kKmhPerMps * (1.0 - 1e-12));
}

/// Lowest speed (km/h) that takes the ego out of the conflict zone before
/// the platoon arrives, minus the gap margin.
inline double clearing_speed(const Scenario& sc, const JunctionState& s) {
  const double remaining = sc.junction_position_m + sc.junction_length_m - s.ego_position_m;
  if (remaining <= 0.0) return 0.0;
  const double window = std::max(crossing_time_to_arrival(sc, s) - sc.gap_margin_s, sc.tick_s);
  if (std::isinf(window)) return 0.0;
  return remaining / window * kKmhPerMps;
}

/// True when the ego is past the point where it could stop comfortably and
/// can still clear the junction ahead of the platoon at its current speed.
inline bool committed_to_cross(const Scenario& sc, const JunctionState& s) {
  const double gap = sc.junction_position_m - s.ego_position_m;
  if (gap < 0.0) return false;
  if (s.ego_speed_kmh <= braking_safe_speed(sc, gap)) return false;
  const double t_arr = crossing_time_to_arrival(sc, s);
  if (std::isinf(t_arr)) return false;
  const double v = s.ego_speed_kmh / kKmhPerMps;
  return v > 0.0 && (gap + sc.junction_length_m) / v <= t_arr - sc.gap_margin_s;
}

/// Coarse situation of the ego relative to the priority traffic.
enum class Phase : std::uint8_t {
  kYield = 0,  // platoon still to pass, ego cannot get through ahead of it
  kAhead = 1,  // platoon still to pass, ego gets through ahead of it at its speed
  kClear = 2   // platoon has cleared the junction
};

inline Phase junction_phase(const Scenario& sc, const JunctionState& s) {
  if (s.crossing_cleared || crossing_has_cleared(sc, s.crossing_position_m)) return Phase::kClear;
  const double remaining = sc.junction_position_m + sc.junction_length_m - s.ego_position_m;
  if (remaining <= 0.0) return Phase::kAhead;
  const double v = s.ego_speed_kmh / kKmhPerMps;
  const double t_arr = crossing_time_to_arrival(sc, s);
  return v > 0.0 && remaining / v <= t_arr - sc.gap_margin_s ? Phase::kAhead : Phase::kYield;
}

/// Krauss-style safe speed in km/h; +inf when the junction imposes nothing.
inline double safe_speed(const Scenario& sc, const JunctionState& s) {
  if (s.crossing_cleared || crossing_has_cleared(sc, s.crossing_position_m)) return kInf;
  const double x = s.ego_position_m;
  if (x >= sc.junction_position_m + sc.junction_length_m) return kInf;
  if (x > sc.junction_position_m) return kInf;  // inside: leaving is the only option
  if (committed_to_cross(sc, s)) return kInf;
  return braking_safe_speed(sc, sc.junction_position_m - x);
}

/// Permitted speeds with an explicit cap (the speed limit for the agent, a
/// driver's own top speed for simulated humans). The lower bound is zero
/// except when the ego is committed to, or inside, the conflict zone while
/// the platoon is still to come.
inline Interval rb_interval(const Scenario& sc, const JunctionState& s, double cap_kmh) {
  const double hi = std::min(safe_speed(sc, s), cap_kmh);
  double lo = 0.0;
  const bool pending = !(s.crossing_cleared || crossing_has_cleared(sc, s.crossing_position_m));
  if (pending && (ego_in_zone(sc, s.ego_position_m) || committed_to_cross(sc, s))) {
    lo = std::min(clearing_speed(sc, s), hi);
  }
  return {lo, hi};
}

inline ActionSet junction_rb(const Scenario& sc, const JunctionState& s) {
  const Interval iv = rb_interval(sc, s, sc.speed_limit_kmh);
  return ActionSet::interval(iv.lo, iv.hi);
}

// Task reward ------------------------------------------------------------------

/// 10 + mean of the last three speeds for every reward boundary crossed this
/// tick, -1 if none was crossed.
inline double junction_task_reward(const Scenario& sc, double position_before,
                                   double position_after, const std::array<double, 3>& last_speeds) {
  const auto boundary = [&](double x) {
    return static_cast<long long>(std::floor(x / sc.reward_spacing_m));
  };
  const long long crossed = boundary(position_after) - boundary(position_before);
  if (crossed <= 0) return -1.0;
  const double mean = (last_speeds[0] + last_speeds[1] + last_speeds[2]) / 3.0;
  return static_cast<double>(crossed) * (10.0 + mean);
}

// Simulator ----------------------------------------------------------------------

/// Deterministic point-mass simulator of the ego approaching the junction.
/// The ego is speed-controlled: each tick it drives at the executed speed.
class JunctionSim {
 public:
  explicit JunctionSim(Scenario scenario) : sc_(std::move(scenario)) {
    sc_.validate();
    reset();
  }

  const Scenario& scenario() const { return sc_; }
  const JunctionState& state() const { return s_; }
  bool collided() const { return collided_; }
  std::size_t collision_ticks() const { return collision_ticks_; }
  bool finished() const { return s_.ego_position_m >= sc_.route_length_m; }

  EnvState reset() {
    s_ = JunctionState{};
    collided_ = false;
    collision_ticks_ = 0;
    last_speeds_ = {0.0, 0.0, 0.0};
    update_derived();
    return observe();
  }

  EnvState observe() const { return to_env_state(s_, finished()); }

  std::size_t action_count() const { return kActionCount; }

  /// Target speed requested by action `id`: current speed changed by
  /// (id - 5) increments, kept within [0, vehicle max].
  double target_speed(ActionId id) const {
    if (id >= kActionCount) throw std::out_of_range("junction: action id out of range");
    const double delta = (static_cast<double>(id) - static_cast<double>(kHoldAction)) *
                         sc_.action_increment_kmh;
    return std::clamp(s_.ego_speed_kmh + delta, 0.0, sc_.vehicle_max_speed_kmh);
  }

  Action proposed_action(ActionId id) const { return target_speed(id); }

  /// Drives one tick at `action` km/h and returns the task reward.
  double execute(const Action& action) {
    const double v = std::clamp(std::get<double>(action), 0.0, sc_.vehicle_max_speed_kmh);
    const double before = s_.ego_position_m;
    s_.ego_position_m += v / kKmhPerMps * sc_.tick_s;
    s_.ego_speed_kmh = v;
    last_speeds_ = {last_speeds_[1], last_speeds_[2], v};
    ++s_.time_step;
    update_derived();
    collided_ = ego_in_zone(sc_, s_.ego_position_m) && s_.junction_occupied;
    if (collided_) ++collision_ticks_;
    return junction_task_reward(sc_, before, s_.ego_position_m, last_speeds_);
  }

  ActionSet rb(const EnvState& e) const { return junction_rb(sc_, from_env_state(e)); }

 private:
  void update_derived() {
    s_.distance_to_junction_m = sc_.junction_position_m - s_.ego_position_m;
    s_.crossing_position_m = crossing_head_position(sc_, s_.time_step);
    s_.crossing_speed_kmh =
        static_cast<double>(s_.time_step) >= sc_.crossing.spawn_tick ? sc_.crossing.speed_kmh : 0.0;
    s_.junction_occupied = crossing_in_zone(sc_, s_.crossing_position_m);
    s_.crossing_cleared = crossing_has_cleared(sc_, s_.crossing_position_m);
  }

  Scenario sc_;
  JunctionState s_;
  std::array<double, 3> last_speeds_{};
  bool collided_ = false;
  std::size_t collision_ticks_ = 0;
};

inline double safe_speed(const Scenario& sc, const EnvState& e) {
  return safe_speed(sc, from_env_state(e));
}

// Simulated humans ----------------------------------------------------------------

/// Driving style of a simulated human: top speed, acceleration per tick and
/// an optional allowance over the speed limit (top speed is used if absent).
struct HumanProfile {
  double max_speed_kmh = 50.0;
  double max_accel_kmh_per_tick = 1.0;
  std::optional<double> speed_limit_overshoot_kmh;

  double cap(const Scenario& sc) const {
    if (!speed_limit_overshoot_kmh) return max_speed_kmh;
    return std::min(max_speed_kmh, sc.speed_limit_kmh + *speed_limit_overshoot_kmh);
  }
};

inline void to_json(nlohmann::json& j, const HumanProfile& p) {
  j = {{"max_speed_kmh", p.max_speed_kmh}, {"max_accel_kmh_per_tick", p.max_accel_kmh_per_tick}};
  if (p.speed_limit_overshoot_kmh) j["speed_limit_overshoot_kmh"] = *p.speed_limit_overshoot_kmh;
}

inline void from_json(const nlohmann::json& j, HumanProfile& p) {
  p.max_speed_kmh = j.at("max_speed_kmh").get<double>();
  p.max_accel_kmh_per_tick = j.at("max_accel_kmh_per_tick").get<double>();
  if (j.contains("speed_limit_overshoot_kmh")) {
    p.speed_limit_overshoot_kmh = j.at("speed_limit_overshoot_kmh").get<double>();
  }
  if (!(p.max_speed_kmh > 0.0)) throw std::invalid_argument("human profile: max_speed_kmh must be > 0");
  if (!(p.max_accel_kmh_per_tick > 0.0)) {
    throw std::invalid_argument("human profile: max_accel_kmh_per_tick must be > 0");
  }
}

struct HumanDatasetConfig {
  std::vector<HumanProfile> profiles;
  std::size_t episodes_per_profile = 20;
  std::uint64_t seed = 1;
  double accel_jitter = 0.05;      // relative, uniform
  double speed_jitter_kmh = 1.0;   // absolute, uniform
};

inline void to_json(nlohmann::json& j, const HumanDatasetConfig& c) {
  j = {{"profiles", c.profiles},
       {"episodes_per_profile", c.episodes_per_profile},
       {"seed", c.seed},
       {"accel_jitter", c.accel_jitter},
       {"speed_jitter_kmh", c.speed_jitter_kmh}};
}

inline void from_json(const nlohmann::json& j, HumanDatasetConfig& c) {
  const HumanDatasetConfig d;
  c.profiles = j.at("profiles").get<std::vector<HumanProfile>>();
  c.episodes_per_profile = j.value("episodes_per_profile", d.episodes_per_profile);
  c.seed = j.value("seed", d.seed);
  c.accel_jitter = j.value("accel_jitter", d.accel_jitter);
  c.speed_jitter_kmh = j.value("speed_jitter_kmh", d.speed_jitter_kmh);
}

struct HumanEpisode {
  std::size_t profile_index = 0;
  HumanProfile realised;  // profile after per-episode jitter
  Trajectory trajectory;
};

/// Drives one episode with a Krauss-style human: accelerate towards the own
/// top speed, never above the safe speed.
inline Trajectory drive_human(const Scenario& sc, const HumanProfile& p) {
  JunctionSim sim(sc);
  Trajectory traj;
  traj.discount = kDefaultDiscount;
  EnvState state = sim.reset();
  const double cap = p.cap(sc);
  for (std::size_t t = 0; !state.terminal && t < sc.horizon_ticks; ++t) {
    const JunctionState& js = sim.state();
    const Interval allowed = rb_interval(sc, js, cap);
    const double target = std::min(js.ego_speed_kmh + p.max_accel_kmh_per_tick, cap);
    const double v = std::clamp(target, allowed.lo, allowed.hi);
    const double change = (v - js.ego_speed_kmh) / sc.action_increment_kmh;
    const auto action = static_cast<ActionId>(std::clamp<long long>(
        std::llround(change) + static_cast<long long>(kHoldAction), 0,
        static_cast<long long>(kActionCount - 1)));
    const double raw = sim.execute(v);
    traj.steps.push_back(TrajectoryStep{t, std::move(state), 1.0, action, v, raw, raw});
    if (sim.collided()) ++traj.collisions;
    state = sim.observe();
  }
  traj.truncated = !state.terminal;
  traj.final_state = std::move(state);
  return traj;
}

/// Simulated human dataset, deterministic in the seed.
inline std::vector<HumanEpisode> generate_human_dataset(const Scenario& sc,
                                                        const HumanDatasetConfig& cfg) {
  if (cfg.profiles.empty()) throw std::invalid_argument("human dataset: no profiles");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<HumanEpisode> out;
  out.reserve(cfg.profiles.size() * cfg.episodes_per_profile);
  for (std::size_t pi = 0; pi < cfg.profiles.size(); ++pi) {
    for (std::size_t e = 0; e < cfg.episodes_per_profile; ++e) {
      HumanProfile p = cfg.profiles[pi];
      p.max_accel_kmh_per_tick *= 1.0 + cfg.accel_jitter * unit(rng);
      p.max_speed_kmh += cfg.speed_jitter_kmh * unit(rng);
      out.push_back(HumanEpisode{pi, p, drive_human(sc, p)});
    }
  }
  return out;
}

// Trajectory features --------------------------------------------------------------

/// Ticks taken to reach the end of the route.
inline double finish_time(const Trajectory& t) { return static_cast<double>(t.length()); }

/// Speed driven during each tick (the speed recorded in the following state).
inline std::vector<double> speed_series(const Trajectory& t) {
  std::vector<double> v;
  v.reserve(t.length());
  for (std::size_t i = 0; i < t.length(); ++i) {
    const EnvState& next = i + 1 < t.length() ? t.steps[i + 1].state : t.final_state;
    v.push_back(next.obs.at(kObsSpeed));
  }
  return v;
}

} // namespace hava::junction
