#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hava/alignment.hpp"
#include "hava/core_mdp.hpp"

namespace hava::grid {

enum Move : ActionId { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr std::size_t kMoveCount = 4;

inline constexpr double kGoalReward = 100.0;
inline constexpr double kStepReward = -1.0;

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline Cell moved(Cell c, ActionId move) {
  switch (move) {
    case kUp: return {c.x, c.y + 1};
    case kDown: return {c.x, c.y - 1};
    case kLeft: return {c.x - 1, c.y};
    case kRight: return {c.x + 1, c.y};
    default: throw std::invalid_argument("grid: unknown move " + std::to_string(move));
  }
}

inline ActionId parse_move(char c) {
  switch (c) {
    case 'U': return kUp;
    case 'D': return kDown;
    case 'L': return kLeft;
    case 'R': return kRight;
    default: throw std::invalid_argument(std::string("grid: unknown move letter '") + c + "'");
  }
}

/// Grid world with lawn tiles. Coordinates have y growing upwards; the first
/// row of a map file is the top row. Observations are {x, y}.
///
/// Map characters: '.' free, 'L' lawn, 'G' goal, 'S' start.
class GridWorld {
 public:
  static GridWorld parse(std::istream& in) {
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      rows.push_back(line);
    }
    if (rows.empty()) throw std::runtime_error("grid map: no rows");
    GridWorld g;
    g.height_ = static_cast<int>(rows.size());
    g.width_ = static_cast<int>(rows.front().size());
    g.lawn_.assign(static_cast<std::size_t>(g.width_ * g.height_), false);
    bool have_goal = false, have_start = false;
    for (int r = 0; r < g.height_; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (static_cast<int>(row.size()) != g.width_) {
        throw std::runtime_error("grid map: row " + std::to_string(r + 1) + " has width " +
                                 std::to_string(row.size()) + ", expected " +
                                 std::to_string(g.width_));
      }
      const int y = g.height_ - 1 - r;
      for (int x = 0; x < g.width_; ++x) {
        const char c = row[static_cast<std::size_t>(x)];
        switch (c) {
          case '.': break;
          case 'L': g.lawn_[g.index({x, y})] = true; break;
          case 'G':
            if (have_goal) throw std::runtime_error("grid map: more than one goal");
            g.goal_ = {x, y};
            have_goal = true;
            break;
          case 'S':
            if (have_start) throw std::runtime_error("grid map: more than one start");
            g.start_ = {x, y};
            have_start = true;
            break;
          default:
            throw std::runtime_error("grid map: row " + std::to_string(r + 1) +
                                     ": unknown character '" + std::string(1, c) + "'");
        }
      }
    }
    if (!have_goal || !have_start) throw std::runtime_error("grid map: needs one 'G' and one 'S'");
    g.pos_ = g.start_;
    return g;
  }

  static GridWorld parse(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static GridWorld load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read grid map " + path.string());
    return parse(in);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t cell_count() const { return lawn_.size(); }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }
  Cell position() const { return pos_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  bool is_lawn(Cell c) const { return in_bounds(c) && lawn_[index(c)]; }
  std::size_t lawn_count() const { return static_cast<std::size_t>(std::count(lawn_.begin(), lawn_.end(), true)); }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y * width_ + c.x); }

  static Cell cell_of(const EnvState& s) {
    if (s.obs.size() != 2) throw std::invalid_argument("grid: state must be {x, y}");
    return {static_cast<int>(s.obs[0]), static_cast<int>(s.obs[1])};
  }

  // Environment interface ---------------------------------------------------

  EnvState reset() { return reset_at(start_); }

  EnvState reset_at(Cell c) {
    if (!in_bounds(c)) throw std::invalid_argument("grid: start outside the grid");
    pos_ = c;
    return observe();
  }

  EnvState observe() const {
    return EnvState{{static_cast<double>(pos_.x), static_cast<double>(pos_.y)}, pos_ == goal_};
  }

  std::size_t action_count() const { return kMoveCount; }
  Action proposed_action(ActionId id) const { return id; }

  double execute(const Action& action) {
    const ActionId move = std::get<ActionId>(action);
    const Cell next = moved(pos_, move);
    if (!in_bounds(next)) throw std::logic_error("grid: executed move leaves the grid");
    const double r = task_reward(pos_, move);
    pos_ = next;
    return r;
  }

  // Norms and reward ----------------------------------------------------------

  double task_reward(Cell from, ActionId move) const {
    return moved(from, move) == goal_ ? kGoalReward : kStepReward;
  }

  /// Moves that keep the agent inside the grid.
  ActionSet rb(Cell c) const {
    std::vector<ActionId> allowed;
    for (ActionId m = 0; m < kMoveCount; ++m) {
      if (in_bounds(moved(c, m))) allowed.push_back(m);
    }
    return ActionSet::discrete(std::move(allowed));
  }

  /// In-bounds moves that do not step onto a lawn tile. May be empty.
  ActionSet dd(Cell c) const {
    std::vector<ActionId> allowed;
    for (ActionId m = 0; m < kMoveCount; ++m) {
      const Cell n = moved(c, m);
      if (in_bounds(n) && !is_lawn(n)) allowed.push_back(m);
    }
    return ActionSet::discrete(std::move(allowed));
  }

  ActionSet rb(const EnvState& s) const { return rb(cell_of(s)); }
  ActionSet dd(const EnvState& s) const { return dd(cell_of(s)); }

 private:
  GridWorld() = default;

  int width_ = 0;
  int height_ = 0;
  std::vector<bool> lawn_;
  Cell goal_{};
  Cell start_{};
  Cell pos_{};
};

inline double grid_task_reward(const GridWorld& g, Cell from, ActionId move) {
  return g.task_reward(from, move);
}
inline ActionSet grid_rb(const GridWorld& g, Cell c) { return g.rb(c); }
inline ActionSet grid_dd(const GridWorld& g, Cell c) { return g.dd(c); }

/// Norm sources bound to a (copied) grid layout.
inline AlignmentValue grid_alignment_value(const GridWorld& g, double alpha, bool with_rb = true,
                                           bool with_dd = true) {
  AlignmentValue av;
  av.alpha = alpha;
  if (with_rb) av.rb = [g](const EnvState& s) { return g.rb(s); };
  if (with_dd) av.dd = [g](const EnvState& s) { return g.dd(s); };
  return av;
}

/// A hand-specified path from `start` to the goal.
struct GridPolicy {
  std::string name;
  Cell start;
  std::vector<ActionId> actions;
};

/// Reads lines of `name start_x start_y MOVES`, e.g. `pi_R 1 1 UUUUUR`.
inline std::vector<GridPolicy> parse_reference_policies(std::istream& in) {
  std::vector<GridPolicy> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream row(line);
    GridPolicy p;
    std::string moves;
    if (!(row >> p.name >> p.start.x >> p.start.y >> moves)) {
      throw std::runtime_error("reference policies line " + std::to_string(line_no) +
                               ": expected 'name x y MOVES'");
    }
    for (char c : moves) p.actions.push_back(parse_move(c));
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<GridPolicy> load_reference_policies(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read reference policies " + path.string());
  return parse_reference_policies(in);
}

/// Cells visited by a policy, start included.
inline std::vector<Cell> policy_path(const GridPolicy& p) {
  std::vector<Cell> path{p.start};
  for (ActionId a : p.actions) path.push_back(moved(path.back(), a));
  return path;
}

/// Discounted return of `policy` under the wrapped grid with forgiveness `alpha`.
inline Trajectory run_reference_policy(const GridWorld& g, const GridPolicy& policy, double alpha,
                                       double gamma) {
  GridWorld base = g;
  base.reset_at(policy.start);
  struct FromStart {
    GridWorld grid;
    Cell start;
    EnvState reset() { return grid.reset_at(start); }
    EnvState observe() const { return grid.observe(); }
    std::size_t action_count() const { return grid.action_count(); }
    Action proposed_action(ActionId id) const { return grid.proposed_action(id); }
    double execute(const Action& a) { return grid.execute(a); }
  };
  auto env = wrap(FromStart{base, policy.start}, grid_alignment_value(g, alpha), gamma);
  return rollout(sequence_policy(policy.actions), env, policy.actions.size());
}

/// J of each reference policy (in input order) at one alpha.
inline std::vector<double> evaluate_reference_policies(const GridWorld& g,
                                                       const std::vector<GridPolicy>& policies,
                                                       double alpha, double gamma) {
  std::vector<double> returns;
  returns.reserve(policies.size());
  for (const auto& p : policies) {
    returns.push_back(discounted_return(run_reference_policy(g, p, alpha, gamma)));
  }
  return returns;
}

} // namespace hava::grid
