#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "hava/core_mdp.hpp"

namespace hava {

/// Closed interval of continuous actions, [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Permitted actions for a state: a finite set of discrete actions or a
/// closed interval of continuous ones.
class ActionSet {
 public:
  ActionSet() = default;

  static ActionSet discrete(std::vector<ActionId> actions) {
    std::sort(actions.begin(), actions.end());
    actions.erase(std::unique(actions.begin(), actions.end()), actions.end());
    ActionSet set;
    set.repr_ = std::move(actions);
    return set;
  }

  static ActionSet interval(double lo, double hi) {
    if (!(lo <= hi)) {
      throw std::invalid_argument("action interval requires lo <= hi");
    }
    ActionSet set;
    set.repr_ = Interval{lo, hi};
    return set;
  }

  bool is_interval() const { return std::holds_alternative<Interval>(repr_); }
  bool is_discrete() const { return !is_interval(); }

  bool empty() const {
    return is_discrete() && std::get<std::vector<ActionId>>(repr_).empty();
  }

  const std::vector<ActionId>& actions() const { return std::get<std::vector<ActionId>>(repr_); }
  const Interval& bounds() const { return std::get<Interval>(repr_); }

  bool contains(const Action& action) const {
    if (is_interval()) {
      return std::holds_alternative<double>(action) && bounds().contains(std::get<double>(action));
    }
    if (!std::holds_alternative<ActionId>(action)) return false;
    const auto& a = actions();
    return std::binary_search(a.begin(), a.end(), std::get<ActionId>(action));
  }

  friend bool operator==(const ActionSet&, const ActionSet&) = default;

 private:
  std::variant<std::vector<ActionId>, Interval> repr_;
};

// Alignment scoring --------------------------------------------------------

/// al(tau, d) = max((tau - d) / tau, 0). Requires tau > 0 and d >= 0.
inline double alignment_score(double tau, double d) {
  if (!(tau > 0.0)) throw std::invalid_argument("alignment_score: tau must be > 0");
  if (!(d >= 0.0)) throw std::invalid_argument("alignment_score: distance must be >= 0");
  if (std::isinf(d)) return 0.0;
  return std::max((tau - d) / tau, 0.0);
}

/// Minimal distance from `action` to the permitted set.
///
/// Intervals use the endpoint rule. Discrete actions carry no metric, so a
/// finite set yields 0 for members and +infinity otherwise.
inline double min_distance(const Action& action, const ActionSet& allowed) {
  if (allowed.empty()) throw std::invalid_argument("min_distance: empty action set");
  if (allowed.is_interval()) {
    if (!std::holds_alternative<double>(action)) {
      throw std::invalid_argument("min_distance: discrete action against an interval");
    }
    const double v = std::get<double>(action);
    const auto& b = allowed.bounds();
    if (v < b.lo) return b.lo - v;
    if (v > b.hi) return v - b.hi;
    return 0.0;
  }
  if (!std::holds_alternative<ActionId>(action)) {
    throw std::invalid_argument("min_distance: continuous action against a finite set");
  }
  return allowed.contains(action) ? 0.0 : std::numeric_limits<double>::infinity();
}

/// delta_t: the worse of the two alignments.
inline double worst_alignment(double al_rb, double al_dd) { return std::min(al_rb, al_dd); }

// Reputation dynamics ------------------------------------------------------

inline constexpr double kReputationFloorIncrement = 0.001;

/// w_inc(w) = alpha * (e^w - 1) + 0.001
inline double reputation_increment(double w, double alpha) {
  return alpha * std::expm1(w) + kReputationFloorIncrement;
}

/// w' = min(w + w_inc(w), delta). Stays in [0, 1] and never exceeds delta.
inline double update_reputation(double w, double delta, double alpha) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("update_reputation: w outside [0,1]");
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("update_reputation: delta outside [0,1]");
  }
  return std::min(w + reputation_increment(w, alpha), delta);
}

inline constexpr std::size_t kRecoveryStepCap = 1'000'000;

/// Number of consecutive fully aligned steps (delta = 1) taking the
/// reputation from 0 back to 1, counting the first 0 -> 0.001 step.
/// Empty if 1 is not reached within kRecoveryStepCap steps.
inline std::optional<std::size_t> recovery_steps(double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("recovery_steps: alpha must be >= 0");
  double w = 0.0;
  for (std::size_t step = 1; step <= kRecoveryStepCap; ++step) {
    w = update_reputation(w, 1.0, alpha);
    if (w >= 1.0) return step;
  }
  return std::nullopt;
}

/// Reputation-weighted reward: positive rewards are scaled by w, negative
/// rewards are amplified by (2 - w).
inline double transform_reward(double raw, double w_next) {
  if (!(w_next >= 0.0 && w_next <= 1.0)) {
    throw std::invalid_argument("transform_reward: w outside [0,1]");
  }
  return raw >= 0.0 ? w_next * raw : raw * (1.0 + (1.0 - w_next));
}

/// Returns `proposed` when permitted, otherwise the closest permitted action.
/// Intervals clamp. For finite sets every non-member is equally far, so the
/// lowest action index wins.
inline Action project_action(const Action& proposed, const ActionSet& rb_set) {
  if (rb_set.empty()) throw std::invalid_argument("project_action: empty rule-based set");
  if (rb_set.contains(proposed)) return proposed;
  if (rb_set.is_interval()) {
    if (!std::holds_alternative<double>(proposed)) {
      throw std::invalid_argument("project_action: discrete action against an interval");
    }
    const auto& b = rb_set.bounds();
    return std::clamp(std::get<double>(proposed), b.lo, b.hi);
  }
  if (!std::holds_alternative<ActionId>(proposed)) {
    throw std::invalid_argument("project_action: continuous action against a finite set");
  }
  return rb_set.actions().front();
}

inline double action_value(const Action& a) {
  return std::holds_alternative<double>(a) ? std::get<double>(a)
                                           : static_cast<double>(std::get<ActionId>(a));
}

// Alignment Value ----------------------------------------------------------

using NormFunction = std::function<ActionSet(const EnvState&)>;

/// The pair of norm sources plus the tolerance and forgiveness rate.
/// Either source may be absent, which gives the single-source ablations.
struct AlignmentValue {
  NormFunction rb;
  NormFunction dd;
  double tau = 1.0;
  double alpha = 1.0;

  bool has_rb() const { return static_cast<bool>(rb); }
  bool has_dd() const { return static_cast<bool>(dd); }
};

struct AlignmentOutcome {
  double d_rb = 0.0;
  double d_dd = 0.0;
  double al_rb = 1.0;
  double al_dd = 1.0;
  double delta = 1.0;
  double w_next = 1.0;
  Action executed;
};

namespace detail {

inline std::pair<double, double> judge(const Action& proposed, const ActionSet& allowed,
                                       double tau) {
  if (allowed.is_discrete()) {
    // indicator rule; tau plays no role for unordered action labels
    if (allowed.contains(proposed)) return {0.0, 1.0};
    return {std::numeric_limits<double>::infinity(), 0.0};
  }
  const double d = min_distance(proposed, allowed);
  return {d, alignment_score(tau, d)};
}

} // namespace detail

/// Judges one proposed action against the Alignment Value.
///
/// Distances are measured on the proposed action, before projection, so an
/// RB violation still costs reputation even though a permitted action is
/// executed. `executed` is always a member of RB(state) when RB is present.
inline AlignmentOutcome hava_step(const AlignmentValue& av, const EnvState& state, double w,
                                  const Action& proposed) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("hava_step: w outside [0,1]");
  AlignmentOutcome out;
  out.executed = proposed;
  if (av.has_rb()) {
    const ActionSet rb = av.rb(state);
    if (rb.empty()) throw std::invalid_argument("hava_step: rule-based norms permit no action");
    std::tie(out.d_rb, out.al_rb) = detail::judge(proposed, rb, av.tau);
    out.executed = project_action(proposed, rb);
  }
  if (av.has_dd()) {
    const ActionSet dd = av.dd(state);
    std::tie(out.d_dd, out.al_dd) = detail::judge(proposed, dd, av.tau);
  }
  out.delta = worst_alignment(out.al_rb, out.al_dd);
  out.w_next = update_reputation(w, out.delta, av.alpha);
  return out;
}

/// Requirements on an environment that can be wrapped: it exposes its
/// current state, maps action ids into the norms' action space, and executes
/// an already-projected action returning the raw task reward.
template <class E>
concept NormedEnvironment = requires(E env, const E cenv, ActionId id, const Action& a) {
  { env.reset() } -> std::same_as<EnvState>;
  { cenv.observe() } -> std::same_as<EnvState>;
  { cenv.action_count() } -> std::convertible_to<std::size_t>;
  { cenv.proposed_action(id) } -> std::same_as<Action>;
  { env.execute(a) } -> std::convertible_to<double>;
};

template <class E>
concept CollisionAware = requires(const E cenv) {
  { cenv.collided() } -> std::convertible_to<bool>;
};

/// The augmented MDP: reputation joins the state (starting at 1 each
/// episode), rewards are reputation-weighted and executed actions are
/// projected into RB.
template <NormedEnvironment Env>
class HavaEnv {
 public:
  HavaEnv(Env env, AlignmentValue av, double gamma = kDefaultDiscount)
      : env_(std::move(env)), av_(std::move(av)), gamma_(gamma) {
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw std::invalid_argument("discount must be in [0,1)");
  }

  EnvState reset() {
    w_ = 1.0;
    return env_.reset();
  }

  Transition step(ActionId id) {
    const EnvState state = env_.observe();
    if (state.terminal) throw std::logic_error("step called on a terminal state");
    last_ = hava_step(av_, state, w_, env_.proposed_action(id));
    const double raw = env_.execute(last_.executed);
    w_ = last_.w_next;
    Transition tr;
    tr.state = env_.observe();
    tr.reputation = w_;
    tr.raw_reward = raw;
    tr.reward = transform_reward(raw, w_);
    tr.executed = action_value(last_.executed);
    if constexpr (CollisionAware<Env>) tr.collision = env_.collided();
    return tr;
  }

  std::size_t action_count() const { return env_.action_count(); }
  double reputation() const { return w_; }
  double discount() const { return gamma_; }
  const AlignmentOutcome& last_outcome() const { return last_; }
  const AlignmentValue& alignment_value() const { return av_; }
  Env& base() { return env_; }
  const Env& base() const { return env_; }

 private:
  Env env_;
  AlignmentValue av_;
  double gamma_;
  double w_ = 1.0;
  AlignmentOutcome last_;
};

/// Builds M' from an environment and an Alignment Value.
template <NormedEnvironment Env>
HavaEnv<Env> wrap(Env env, AlignmentValue av, double gamma = kDefaultDiscount) {
  return HavaEnv<Env>(std::move(env), std::move(av), gamma);
}

} // namespace hava
