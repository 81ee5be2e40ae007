#include <gtest/gtest.h>

#include <cmath>

#include "hava/grid_world.hpp"
#include "support.hpp"

using namespace hava;
using namespace hava::grid;

namespace {

GridWorld toy() { return GridWorld::load(hava::testing::source_dir() / "data/grid/toy.map"); }
std::vector<GridPolicy> refs() {
  return load_reference_policies(hava::testing::source_dir() / "data/grid/reference_policies.txt");
}

// Independent recomputation of a path's return: walks the cells, scores each
// move by lawn membership, updates reputation and weights rewards inline.
double brute_force_return(const GridWorld& g, const GridPolicy& p, double alpha, double gamma) {
  double w = 1.0, total = 0.0, scale = 1.0;
  int x = p.start.x, y = p.start.y;
  for (ActionId a : p.actions) {
    int nx = x, ny = y;
    if (a == kUp) ++ny;
    if (a == kDown) --ny;
    if (a == kLeft) --nx;
    if (a == kRight) ++nx;
    const bool lawn = g.is_lawn({nx, ny});
    const double delta = lawn ? 0.0 : 1.0;
    w = std::min(w + alpha * (std::exp(w) - 1.0) + 0.001, delta);
    const double r = (nx == g.goal().x && ny == g.goal().y) ? 100.0 : -1.0;
    total += scale * (r >= 0 ? w * r : r * (2.0 - w));
    scale *= gamma;
    x = nx;
    y = ny;
  }
  return total;
}

} // namespace

TEST(GridMap, ParsesToyFixture) {
  const auto g = toy();
  EXPECT_EQ(g.width(), 7);
  EXPECT_EQ(g.height(), 7);
  EXPECT_EQ(g.goal(), (Cell{2, 6}));
  EXPECT_EQ(g.start(), (Cell{1, 1}));
  EXPECT_TRUE(g.is_lawn({0, 3}));
  EXPECT_FALSE(g.is_lawn({5, 3}));
}

TEST(GridMap, RejectsMalformedMaps) {
  EXPECT_THROW(GridWorld::parse(std::string("..G\n..\nS..\n")), std::runtime_error);
  EXPECT_THROW(GridWorld::parse(std::string("..G\n.X.\nS..\n")), std::runtime_error);
  EXPECT_THROW(GridWorld::parse(std::string("...\n...\nS..\n")), std::runtime_error);
  EXPECT_THROW(GridWorld::parse(std::string("")), std::runtime_error);
}

TEST(GridNorms, RbKeepsInsideDdAvoidsLawn) {
  const auto g = toy();
  EXPECT_EQ(g.rb(Cell{0, 0}).actions(), (std::vector<ActionId>{kUp, kRight}));
  const auto dd = g.dd(Cell{1, 2});
  EXPECT_FALSE(dd.contains(Action{ActionId{kUp}}));
  EXPECT_TRUE(dd.contains(Action{ActionId{kDown}}));
  EXPECT_DOUBLE_EQ(g.task_reward({2, 5}, kUp), 100.0);
  EXPECT_DOUBLE_EQ(g.task_reward({2, 4}, kUp), -1.0);
}

TEST(ReferencePolicies, AllReachTheGoal) {
  const auto g = toy();
  for (const auto& p : refs()) {
    const auto path = policy_path(p);
    EXPECT_EQ(path.back(), g.goal()) << p.name;
    for (const auto& c : path) EXPECT_TRUE(g.in_bounds(c)) << p.name;
  }
}

TEST(ReferencePolicies, WorkedRedTrajectory) {
  const auto g = toy();
  const auto red = refs().front();
  const auto t10 = run_reference_policy(g, red, 10.0, 0.99);
  const std::vector<double> expected{-2.0, -2.0, -1.999, -1.988, -1.866};
  ASSERT_EQ(t10.length(), 6u);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t10.steps[i].reward, expected[i], 0.01);
  EXPECT_NEAR(t10.steps[5].reward, 100.0, 1e-9);
  EXPECT_NEAR(discounted_return(t10), 86.0, 1.0);

  const auto t5 = run_reference_policy(g, red, 5.0, 0.99);
  EXPECT_NEAR(t5.final_reputation, 0.26, 0.005);
  EXPECT_NEAR(discounted_return(t5), 15.0, 1.0);
}

TEST(ReferencePolicies, MatchBruteForceOracle) {
  const auto g = toy();
  for (double alpha : {10.0, 5.0, 4.0, 2.0, 1.6, 1.2, 1.0, 0.5, 0.1}) {
    const auto got = evaluate_reference_policies(g, refs(), alpha, 0.99);
    const auto ps = refs();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      EXPECT_NEAR(got[i], brute_force_return(g, ps[i], alpha, 0.99), 1e-9) << ps[i].name << " " << alpha;
    }
  }
}

TEST(ReferencePolicies, PolicyFileErrors) {
  std::istringstream bad("pi_X 1\n");
  EXPECT_THROW(parse_reference_policies(bad), std::runtime_error);
  std::istringstream bad_move("pi_X 1 1 UQ\n");
  EXPECT_THROW(parse_reference_policies(bad_move), std::invalid_argument);
}
