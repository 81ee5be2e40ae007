#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hava/core_mdp.hpp"

namespace hava::rl {

inline constexpr std::size_t kReputationBuckets = 11;

/// Reputation bucket on the grid 0, 0.1, ..., 1.0 (for the default 11 buckets).
inline std::uint64_t reputation_bucket(double w, std::size_t buckets = kReputationBuckets) {
  if (buckets < 2) return 0;
  const double scaled = std::clamp(w, 0.0, 1.0) * static_cast<double>(buckets - 1);
  return static_cast<std::uint64_t>(std::llround(scaled));
}

/// Maps an augmented state (s, w) to a table key.
using StateKeyFn = std::function<std::uint64_t(const EnvState&, double w)>;

class QTable {
 public:
  QTable() = default;
  explicit QTable(std::size_t action_count, double initial = 0.0)
      : actions_(action_count), initial_(initial) {
    if (action_count == 0) throw std::invalid_argument("q table: no actions");
  }

  std::size_t action_count() const { return actions_; }
  std::size_t size() const { return table_.size(); }
  double initial_value() const { return initial_; }

  /// Values for `key`, created at the initial value on first access.
  std::vector<double>& values(std::uint64_t key) {
    auto [it, inserted] = table_.try_emplace(key);
    if (inserted) it->second.assign(actions_, initial_);
    return it->second;
  }

  /// Values for `key`; unseen keys read as the initial value.
  std::vector<double> lookup(std::uint64_t key) const {
    const auto it = table_.find(key);
    return it == table_.end() ? std::vector<double>(actions_, initial_) : it->second;
  }

  bool contains(std::uint64_t key) const { return table_.count(key) != 0; }

  /// argmax with ties to the lowest index.
  static ActionId argmax(const std::vector<double>& q) {
    ActionId best = 0;
    for (ActionId a = 1; a < q.size(); ++a) {
      if (q[a] > q[best]) best = a;
    }
    return best;
  }

  ActionId greedy(std::uint64_t key) const {
    const auto it = table_.find(key);
    return it == table_.end() ? 0 : argmax(it->second);
  }

  double max_value(std::uint64_t key) const {
    const auto it = table_.find(key);
    if (it == table_.end()) return initial_;
    return *std::max_element(it->second.begin(), it->second.end());
  }

  std::vector<std::uint64_t> sorted_keys() const {
    std::vector<std::uint64_t> keys;
    keys.reserve(table_.size());
    for (const auto& kv : table_) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  friend void to_json(nlohmann::json& j, const QTable& q) {
    nlohmann::json entries = nlohmann::json::array();
    for (auto key : q.sorted_keys()) entries.push_back({{"key", key}, {"q", q.table_.at(key)}});
    j = {{"action_count", q.actions_}, {"initial_value", q.initial_}, {"entries", entries}};
  }

  friend void from_json(const nlohmann::json& j, QTable& q) {
    q = QTable(j.at("action_count").get<std::size_t>(), j.value("initial_value", 0.0));
    for (const auto& e : j.at("entries")) {
      auto values = e.at("q").get<std::vector<double>>();
      if (values.size() != q.actions_) throw std::runtime_error("q table: entry width mismatch");
      q.table_[e.at("key").get<std::uint64_t>()] = std::move(values);
    }
  }

 private:
  std::size_t actions_ = 0;
  double initial_ = 0.0;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
};

struct TrainConfig {
  std::size_t episodes = 10000;
  std::size_t max_steps = 400;
  double learning_rate = 0.2;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_episodes = 5000;  // linear decay length
  std::size_t reputation_buckets = kReputationBuckets;
  double initial_q = 0.0;
  bool backward_updates = true;  // replay each episode's transitions last-to-first
  std::uint64_t seed = 1;

  void validate() const {
    if (max_steps == 0) throw std::invalid_argument("train config: max_steps must be > 0");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
      throw std::invalid_argument("train config: learning_rate must be in (0, 1]");
    }
    auto unit = [](double e) { return e >= 0.0 && e <= 1.0; };
    if (!unit(epsilon_start) || !unit(epsilon_end)) {
      throw std::invalid_argument("train config: epsilon must be in [0, 1]");
    }
    if (reputation_buckets == 0) throw std::invalid_argument("train config: reputation_buckets must be > 0");
  }

  double epsilon(std::size_t episode) const {
    if (epsilon_decay_episodes == 0 || episode >= epsilon_decay_episodes) return epsilon_end;
    const double f = static_cast<double>(episode) / static_cast<double>(epsilon_decay_episodes);
    return epsilon_start + (epsilon_end - epsilon_start) * f;
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"episodes", c.episodes},
       {"max_steps", c.max_steps},
       {"learning_rate", c.learning_rate},
       {"epsilon_start", c.epsilon_start},
       {"epsilon_end", c.epsilon_end},
       {"epsilon_decay_episodes", c.epsilon_decay_episodes},
       {"reputation_buckets", c.reputation_buckets},
       {"initial_q", c.initial_q},
       {"backward_updates", c.backward_updates},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.episodes = j.value("episodes", d.episodes);
  c.max_steps = j.value("max_steps", d.max_steps);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.epsilon_start = j.value("epsilon_start", d.epsilon_start);
  c.epsilon_end = j.value("epsilon_end", d.epsilon_end);
  c.epsilon_decay_episodes = j.value("epsilon_decay_episodes", d.epsilon_decay_episodes);
  c.reputation_buckets = j.value("reputation_buckets", d.reputation_buckets);
  c.initial_q = j.value("initial_q", d.initial_q);
  c.backward_updates = j.value("backward_updates", d.backward_updates);
  c.seed = j.value("seed", d.seed);
  c.validate();
}

struct CurvePoint {
  std::size_t episode = 0;
  std::size_t finish_time = 0;
  double ret = 0.0;     // discounted, weighted
  double mean_w = 1.0;  // mean of w_{t+1} over the episode
};

struct TrainResult {
  QTable q;
  std::vector<CurvePoint> curve;
};

/// Called after every training episode with the episode index, its
/// trajectory and the table as updated so far.
using EpisodeCallback = std::function<void(std::size_t, const Trajectory&, const QTable&)>;

/// Greedy policy of a table: argmax per state, ties to the lowest action.
inline Policy greedy_policy(const QTable& q, StateKeyFn key) {
  return [&q, key = std::move(key)](const EnvState& s, double w, std::size_t) {
    return q.greedy(key(s, w));
  };
}

/// Tabular Q-learning with linearly decaying epsilon-greedy exploration.
/// With backward updates the one-step update is applied once per transition
/// at the end of the episode, newest first, which carries the goal reward
/// back along the whole episode in one pass. Deterministic given cfg.seed.
template <RlEnvironment Env>
TrainResult train(Env& env, const TrainConfig& cfg, const StateKeyFn& key,
                  const EpisodeCallback& on_episode = {}) {
  cfg.validate();
  TrainResult result{QTable(env.action_count(), cfg.initial_q), {}};
  QTable& q = result.q;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_action(0, env.action_count() - 1);
  const double gamma = env.discount();
  result.curve.reserve(cfg.episodes);

  struct Sample {
    std::uint64_t key;
    ActionId action;
    double reward;
    std::uint64_t next_key;
    bool terminal;
  };
  std::vector<Sample> episode;
  auto update = [&](const Sample& s, std::size_t ep) {
    const double target = s.reward + (s.terminal ? 0.0 : gamma * q.max_value(s.next_key));
    double& cell = q.values(s.key)[s.action];
    cell += cfg.learning_rate * (target - cell);
    if (!std::isfinite(cell)) {
      throw std::runtime_error("q-learning diverged: non-finite value at episode " +
                               std::to_string(ep));
    }
  };

  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = cfg.epsilon(ep);
    Trajectory traj;
    traj.discount = gamma;
    episode.clear();
    EnvState state = env.reset();
    double w = env.reputation();
    double w_sum = 0.0;
    std::size_t t = 0;
    while (!state.terminal && t < cfg.max_steps) {
      const std::uint64_t k = key(state, w);
      const ActionId a = coin(rng) < eps ? any_action(rng) : q.greedy(k);
      Transition tr = env.step(a);
      const Sample sample{k, a, tr.reward, key(tr.state, tr.reputation), tr.state.terminal};
      if (cfg.backward_updates) {
        episode.push_back(sample);
      } else {
        update(sample, ep);
      }
      traj.steps.push_back(TrajectoryStep{t, std::move(state), w, a, tr.executed, tr.raw_reward,
                                          tr.reward});
      if (tr.collision) ++traj.collisions;
      w_sum += tr.reputation;
      state = std::move(tr.state);
      w = tr.reputation;
      ++t;
    }
    for (auto it = episode.rbegin(); it != episode.rend(); ++it) update(*it, ep);
    traj.truncated = !state.terminal;
    traj.final_state = std::move(state);
    traj.final_reputation = w;
    result.curve.push_back(CurvePoint{ep, t, discounted_return(traj), t ? w_sum / static_cast<double>(t) : w});
    if (on_episode) on_episode(ep, traj, q);
  }
  return result;
}

inline void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "episode,finish_time,return,mean_w\n" << std::setprecision(10);
  for (const auto& c : curve) {
    out << c.episode << ',' << c.finish_time << ',' << c.ret << ',' << c.mean_w << '\n';
  }
}

inline void save_q_table(const std::filesystem::path& path, const QTable& q) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json(q).dump() << '\n';
}

inline QTable load_q_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return nlohmann::json::parse(in).get<QTable>();
}

} // namespace hava::rl
