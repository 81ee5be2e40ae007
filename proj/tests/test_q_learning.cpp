#include <gtest/gtest.h>

#include <cmath>

#include "hava/experiment.hpp"
#include "hava/q_learning.hpp"
#include "support.hpp"

using namespace hava;
using namespace hava::rl;

namespace {

grid::GridWorld toy() { return grid::GridWorld::load(hava::testing::source_dir() / "data/grid/toy.map"); }

// Emits NaN once stepped, to exercise the divergence guard.
struct Poison {
  bool done = false;
  EnvState reset() {
    done = false;
    return {{0.0}, false};
  }
  Transition step(ActionId) {
    done = true;
    Transition t;
    t.state = {{1.0}, true};
    t.reward = std::nan("");
    return t;
  }
  std::size_t action_count() const { return 2; }
  double reputation() const { return 1.0; }
  double discount() const { return 0.9; }
};

} // namespace

TEST(QTable, GreedyTiesAndUnseenStates) {
  QTable q(3);
  EXPECT_EQ(q.greedy(42), 0u);
  q.values(7) = {1.0, 2.0, 2.0};
  EXPECT_EQ(q.greedy(7), 1u);
  EXPECT_EQ(QTable::argmax({0.0, 0.0}), 0u);
  EXPECT_EQ(q.max_value(99), 0.0);
  EXPECT_THROW(QTable(0), std::invalid_argument);
}

TEST(QTable, JsonRoundTrip) {
  QTable q(2, 5.0);
  q.values(3) = {1.5, -2.0};
  q.values(1) = {0.0, 4.0};
  const auto back = nlohmann::json(q).get<QTable>();
  EXPECT_EQ(nlohmann::json(back).dump(), nlohmann::json(q).dump());
  EXPECT_EQ(back.lookup(3), (std::vector<double>{1.5, -2.0}));
  EXPECT_EQ(back.lookup(8), (std::vector<double>{5.0, 5.0}));
}

TEST(TrainConfig, EpsilonDecaysLinearly) {
  TrainConfig c;
  c.epsilon_start = 1.0;
  c.epsilon_end = 0.1;
  c.epsilon_decay_episodes = 10;
  EXPECT_DOUBLE_EQ(c.epsilon(0), 1.0);
  EXPECT_NEAR(c.epsilon(5), 0.55, 1e-12);
  EXPECT_DOUBLE_EQ(c.epsilon(10), 0.1);
  EXPECT_DOUBLE_EQ(c.epsilon(1000), 0.1);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.epsilon_end = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(nlohmann::json({{"max_steps", 0}}).get<TrainConfig>(), std::invalid_argument);
}

TEST(Reputation, Buckets) {
  EXPECT_EQ(reputation_bucket(0.0), 0u);
  EXPECT_EQ(reputation_bucket(1.0), 10u);
  EXPECT_EQ(reputation_bucket(0.26), 3u);
  EXPECT_EQ(reputation_bucket(0.001), 0u);
  EXPECT_EQ(reputation_bucket(0.5, 1), 0u);
}

TEST(Training, GridAgentAvoidsTheLawnAtLowAlpha) {
  const auto g = toy();
  auto env = wrap(g, grid::grid_alignment_value(g, 0.1), 0.99);
  TrainConfig cfg;
  cfg.episodes = 3000;
  cfg.max_steps = 100;
  cfg.epsilon_decay_episodes = 2000;
  cfg.seed = 3;
  const auto key = grid_state_key(g);
  const auto result = train(env, cfg, key);
  const auto t = rollout(greedy_policy(result.q, key), env, 100);
  ASSERT_TRUE(t.final_state.terminal);
  for (const auto& s : t.steps) EXPECT_DOUBLE_EQ(s.reputation, 1.0);
  // shortest lawn-free route from the start takes 12 moves
  EXPECT_EQ(t.length(), 12u);
  EXPECT_NEAR(discounted_return(t), 100.0 * std::pow(0.99, 11) - (1 - std::pow(0.99, 11)) / 0.01, 1e-6);
}

TEST(Training, GridAgentCutsAcrossAtHighAlpha) {
  const auto g = toy();
  auto env = wrap(g, grid::grid_alignment_value(g, 10.0), 0.99);
  TrainConfig cfg;
  cfg.episodes = 3000;
  cfg.max_steps = 100;
  cfg.epsilon_decay_episodes = 2000;
  cfg.seed = 3;
  const auto key = grid_state_key(g);
  const auto result = train(env, cfg, key);
  const auto t = rollout(greedy_policy(result.q, key), env, 100);
  ASSERT_TRUE(t.final_state.terminal);
  EXPECT_EQ(t.length(), 6u);
}

TEST(Training, DeterministicInSeed) {
  const auto g = toy();
  auto env = wrap(g, grid::grid_alignment_value(g, 1.0), 0.99);
  TrainConfig cfg;
  cfg.episodes = 300;
  cfg.max_steps = 50;
  const auto key = grid_state_key(g);
  const auto a = train(env, cfg, key);
  const auto b = train(env, cfg, key);
  EXPECT_EQ(nlohmann::json(a.q).dump(), nlohmann::json(b.q).dump());
  cfg.seed = 2;
  const auto c = train(env, cfg, key);
  EXPECT_NE(nlohmann::json(a.q).dump(), nlohmann::json(c.q).dump());
  ASSERT_EQ(a.curve.size(), 300u);
}

TEST(Training, OnlineAndBackwardUpdatesBothLearn) {
  const auto g = toy();
  auto env = wrap(g, grid::grid_alignment_value(g, 10.0), 0.99);
  TrainConfig cfg;
  cfg.episodes = 3000;
  cfg.max_steps = 100;
  cfg.epsilon_decay_episodes = 2000;
  cfg.backward_updates = false;
  const auto key = grid_state_key(g);
  const auto result = train(env, cfg, key);
  const auto t = rollout(greedy_policy(result.q, key), env, 100);
  EXPECT_TRUE(t.final_state.terminal);
}

TEST(Training, NonFiniteValuesAbort) {
  Poison env;
  TrainConfig cfg;
  cfg.episodes = 5;
  const StateKeyFn key = [](const EnvState& s, double) { return static_cast<std::uint64_t>(s.obs[0]); };
  EXPECT_THROW(train(env, cfg, key), std::runtime_error);
}

TEST(Snapshots, EvenlySpacedInTheWindow) {
  EXPECT_EQ(snapshot_episodes(50000, {500, 2}), (std::vector<std::size_t>{49749, 49999}));
  EXPECT_EQ(snapshot_episodes(100, {500, 2}), (std::vector<std::size_t>{49, 99}));
  EXPECT_EQ(snapshot_episodes(10, {5, 5}).size(), 5u);
  EXPECT_TRUE(snapshot_episodes(0, {}).empty());
}

TEST(CurveCsv, WritesHeaderAndRows) {
  const auto dir = hava::testing::temp_dir("curve");
  write_curve_csv(dir / "c.csv", {{0, 5, 1.5, 0.9}, {1, 4, 2.0, 1.0}});
  std::ifstream in(dir / "c.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "episode,finish_time,return,mean_w");
  EXPECT_EQ(row, "0,5,1.5,0.9");
}
