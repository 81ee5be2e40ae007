#include <gtest/gtest.h>

#include <sstream>

#include "hava/alignment.hpp"
#include "hava/core_mdp.hpp"
#include "hava/trajectory_io.hpp"
#include "support.hpp"

using namespace hava;

namespace {

// Walks right along a line of `length` cells; reaching the end pays 10.
struct Line {
  int length = 5;
  int pos = 0;
  EnvState reset() {
    pos = 0;
    return observe();
  }
  EnvState observe() const { return EnvState{{static_cast<double>(pos)}, pos == length}; }
  std::size_t action_count() const { return 2; }
  Action proposed_action(ActionId id) const { return id; }
  double execute(const Action& a) {
    pos += std::get<ActionId>(a) == 1 ? 1 : 0;
    return pos == length ? 10.0 : -1.0;
  }
};

} // namespace

TEST(DiscountedReturn, Examples) {
  const std::vector<double> r{1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(discounted_return(r, 0.5), 1.75);
  EXPECT_DOUBLE_EQ(discounted_return(std::vector<double>{}, 0.9), 0.0);
  const std::vector<double> goal{0, 0, 0, 0, 0, 26.0};
  EXPECT_NEAR(discounted_return(goal, 0.99), 24.72, 0.05);
}

TEST(SequencePolicy, ThrowsWhenExhausted) {
  const auto p = sequence_policy({1, 0});
  EXPECT_EQ(p(EnvState{}, 1.0, 1), 0u);
  EXPECT_THROW(p(EnvState{}, 1.0, 2), std::out_of_range);
}

TEST(Rollout, RecordsStepsAndStopsAtTerminal) {
  AlignmentValue av;
  av.rb = [](const EnvState&) { return ActionSet::discrete({0, 1}); };
  auto env = wrap(Line{}, av, 0.9);
  const auto t = rollout(sequence_policy({1, 1, 1, 1, 1, 1, 1}), env, 100);
  ASSERT_EQ(t.length(), 5u);
  EXPECT_FALSE(t.truncated);
  EXPECT_TRUE(t.final_state.terminal);
  EXPECT_DOUBLE_EQ(t.steps.back().raw_reward, 10.0);
  EXPECT_DOUBLE_EQ(t.discount, 0.9);
  for (std::size_t i = 0; i < t.length(); ++i) EXPECT_EQ(t.steps[i].t, i);
}

TEST(Rollout, TruncatesAtHorizon) {
  AlignmentValue av;
  auto env = wrap(Line{}, av);
  const auto t = rollout(sequence_policy({0, 0, 0}), env, 3);
  EXPECT_EQ(t.length(), 3u);
  EXPECT_TRUE(t.truncated);
}

TEST(Wrap, ViolationsLowerReputationAndWeightRewards) {
  AlignmentValue av;
  av.alpha = 10.0;
  av.rb = [](const EnvState&) { return ActionSet::discrete({0, 1}); };
  av.dd = [](const EnvState&) { return ActionSet::discrete({0}); };
  auto env = wrap(Line{}, av);
  env.reset();
  const auto tr = env.step(1);
  EXPECT_DOUBLE_EQ(tr.reputation, 0.0);
  EXPECT_DOUBLE_EQ(tr.raw_reward, -1.0);
  EXPECT_DOUBLE_EQ(tr.reward, -2.0);
  const auto tr2 = env.step(0);
  EXPECT_NEAR(tr2.reputation, 0.001, 1e-12);
}

TEST(Wrap, RejectsBadDiscountAndTerminalStep) {
  EXPECT_THROW(wrap(Line{}, AlignmentValue{}, 1.0), std::invalid_argument);
  auto env = wrap(Line{1, 0}, AlignmentValue{});
  env.reset();
  env.step(1);
  EXPECT_THROW(env.step(1), std::logic_error);
}

TEST(TrajectoryCsv, RoundTrip) {
  AlignmentValue av;
  av.dd = [](const EnvState&) { return ActionSet::discrete({1}); };
  auto env = wrap(Line{}, av);
  const auto t = rollout(sequence_policy({1, 0, 1, 1, 1, 1}), env, 100);
  std::stringstream buf;
  write_trajectory_csv(buf, t, {"x"});
  const auto back = read_trajectory_csv(buf, t.discount);
  ASSERT_EQ(back.length(), t.length());
  for (std::size_t i = 0; i < t.length(); ++i) {
    EXPECT_EQ(back.steps[i].state, t.steps[i].state);
    EXPECT_DOUBLE_EQ(back.steps[i].reputation, t.steps[i].reputation);
    EXPECT_EQ(back.steps[i].action, t.steps[i].action);
    EXPECT_DOUBLE_EQ(back.steps[i].reward, t.steps[i].reward);
  }
  EXPECT_EQ(back.final_state, t.final_state);
  EXPECT_DOUBLE_EQ(discounted_return(back), discounted_return(t));
}

TEST(TrajectoryCsv, RejectsMalformedInput) {
  std::stringstream bad_header("x,y\n");
  EXPECT_THROW(read_trajectory_csv(bad_header), std::runtime_error);
  std::stringstream no_final("t,x,w,action,raw_reward,weighted_reward\n0,1,1,0,-1,-1\n");
  EXPECT_THROW(read_trajectory_csv(no_final), std::runtime_error);
  std::stringstream bad_number("t,x,w,action,raw_reward,weighted_reward\n0,abc,1,0,-1,-1\n1,2,1,,,\n");
  EXPECT_THROW(read_trajectory_csv(bad_number), std::runtime_error);
}
