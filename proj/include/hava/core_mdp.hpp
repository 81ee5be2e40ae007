#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hava {

/// Index into an environment's discrete action table.
using ActionId = std::size_t;

/// An action in the space the norms are expressed in: either a discrete
/// action label or a continuous value (target speed for the junction).
using Action = std::variant<ActionId, double>;

inline constexpr double kDefaultDiscount = 0.99;

/// Environment observation. Semantics of `obs` are defined per environment.
struct EnvState {
  std::vector<double> obs;
  bool terminal = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct TrajectoryStep {
  std::size_t t = 0;
  EnvState state;          // s_t, before the action
  double reputation = 1.0; // w_t
  ActionId action = 0;     // proposed by the policy
  double executed = 0.0;   // numeric value of the action sent to the environment
  double raw_reward = 0.0;
  double reward = 0.0;     // raw_reward weighted by w_{t+1}
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  EnvState final_state;
  double final_reputation = 1.0;
  double discount = kDefaultDiscount;
  bool truncated = false;
  std::size_t collisions = 0;

  std::size_t length() const { return steps.size(); }
  bool empty() const { return steps.empty(); }

  /// Reputation after step `i`, i.e. w_{i+1}.
  double reputation_after(std::size_t i) const {
    return i + 1 < steps.size() ? steps[i + 1].reputation : final_reputation;
  }
};

/// Sum of gamma^t * r_t.
inline double discounted_return(std::span<const double> rewards, double gamma) {
  double total = 0.0;
  double scale = 1.0;
  for (double r : rewards) {
    total += scale * r;
    scale *= gamma;
  }
  return total;
}

inline double discounted_return(const Trajectory& trajectory) {
  double total = 0.0;
  double scale = 1.0;
  for (const auto& step : trajectory.steps) {
    total += scale * step.reward;
    scale *= trajectory.discount;
  }
  return total;
}

inline double undiscounted_raw_return(const Trajectory& trajectory) {
  double total = 0.0;
  for (const auto& step : trajectory.steps) total += step.raw_reward;
  return total;
}

/// What an RL-facing environment returns from `step`.
struct Transition {
  EnvState state;
  double reputation = 1.0; // w_{t+1}
  double reward = 0.0;     // weighted
  double raw_reward = 0.0;
  double executed = 0.0;
  bool collision = false;
};

/// Environment seen by policies and learners: states carry the agent's
/// reputation and rewards are already weighted.
template <class E>
concept RlEnvironment = requires(E env, const E cenv, ActionId a) {
  { env.reset() } -> std::same_as<EnvState>;
  { env.step(a) } -> std::same_as<Transition>;
  { cenv.action_count() } -> std::convertible_to<std::size_t>;
  { cenv.reputation() } -> std::convertible_to<double>;
  { cenv.discount() } -> std::convertible_to<double>;
};

/// A policy maps (state, reputation, time step) to an action.
using Policy = std::function<ActionId(const EnvState&, double w, std::size_t t)>;

/// Fixed action sequence indexed by time step; used for hand-specified policies.
inline Policy sequence_policy(std::vector<ActionId> actions) {
  return [actions = std::move(actions)](const EnvState&, double, std::size_t t) -> ActionId {
    if (t >= actions.size()) {
      throw std::out_of_range("sequence policy exhausted at step " + std::to_string(t));
    }
    return actions[t];
  };
}

/// Runs `policy` from the environment's reset state until termination or
/// `max_steps` actions. `truncated` is set if the horizon was hit first.
template <RlEnvironment Env>
Trajectory rollout(const Policy& policy, Env& env, std::size_t max_steps) {
  Trajectory trajectory;
  trajectory.discount = env.discount();
  EnvState state = env.reset();
  double w = env.reputation();
  std::size_t t = 0;
  while (!state.terminal && t < max_steps) {
    const ActionId action = policy(state, w, t);
    Transition tr = env.step(action);
    trajectory.steps.push_back(TrajectoryStep{t, std::move(state), w, action, tr.executed,
                                              tr.raw_reward, tr.reward});
    if (tr.collision) ++trajectory.collisions;
    state = std::move(tr.state);
    w = tr.reputation;
    ++t;
  }
  trajectory.truncated = !state.terminal;
  trajectory.final_state = std::move(state);
  trajectory.final_reputation = w;
  return trajectory;
}

} // namespace hava
