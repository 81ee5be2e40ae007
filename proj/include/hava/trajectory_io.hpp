#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hava/core_mdp.hpp"

namespace hava {

// CSV layout, one file per episode:
//   t,<state columns...>,w,action,raw_reward,weighted_reward
// One row per step, followed by a final row holding the last state and
// w_T with empty action and reward cells.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("trajectory csv line " + std::to_string(line_no) +
                             ": bad number '" + s + "'");
  }
}

} // namespace detail

inline void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                                 const std::vector<std::string>& state_columns) {
  out << "t";
  for (const auto& name : state_columns) out << ',' << name;
  out << ",w,action,raw_reward,weighted_reward\n";
  out << std::setprecision(17);
  auto write_state = [&](const EnvState& s) {
    if (s.obs.size() != state_columns.size()) {
      throw std::invalid_argument("state width does not match csv header");
    }
    for (double v : s.obs) out << ',' << v;
  };
  for (const auto& step : trajectory.steps) {
    out << step.t;
    write_state(step.state);
    out << ',' << step.reputation << ',' << step.action << ',' << step.raw_reward << ','
        << step.reward << '\n';
  }
  out << trajectory.steps.size();
  write_state(trajectory.final_state);
  out << ',' << trajectory.final_reputation << ",,,\n";
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                                 const std::vector<std::string>& state_columns) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trajectory_csv(out, trajectory, state_columns);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Reads a trajectory written by write_trajectory_csv. The final row marks
/// the last state; a missing final row means the episode was cut short.
inline Trajectory read_trajectory_csv(std::istream& in, double discount = kDefaultDiscount,
                                      bool terminal_at_end = true) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory csv: missing header");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 5 || header.front() != "t" || header[header.size() - 4] != "w" ||
      header[header.size() - 3] != "action" || header[header.size() - 2] != "raw_reward" ||
      header.back() != "weighted_reward") {
    throw std::runtime_error("trajectory csv: unexpected header '" + line + "'");
  }
  const std::size_t width = header.size() - 5;

  Trajectory trajectory;
  trajectory.discount = discount;
  bool saw_final = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (saw_final) throw std::runtime_error("trajectory csv: rows after final state");
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("trajectory csv line " + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) + " cells");
    }
    EnvState state;
    state.obs.reserve(width);
    for (std::size_t i = 0; i < width; ++i) {
      state.obs.push_back(detail::parse_double(cells[1 + i], line_no));
    }
    const double w = detail::parse_double(cells[1 + width], line_no);
    if (cells[2 + width].empty()) {
      state.terminal = terminal_at_end;
      trajectory.final_state = std::move(state);
      trajectory.final_reputation = w;
      saw_final = true;
      continue;
    }
    TrajectoryStep step;
    step.t = static_cast<std::size_t>(detail::parse_double(cells[0], line_no));
    step.state = std::move(state);
    step.reputation = w;
    step.action = static_cast<ActionId>(detail::parse_double(cells[2 + width], line_no));
    step.raw_reward = detail::parse_double(cells[3 + width], line_no);
    step.reward = detail::parse_double(cells[4 + width], line_no);
    step.executed = std::numeric_limits<double>::quiet_NaN();
    trajectory.steps.push_back(std::move(step));
  }
  if (!saw_final) throw std::runtime_error("trajectory csv: missing final state row");
  trajectory.truncated = !terminal_at_end;
  return trajectory;
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path,
                                      double discount = kDefaultDiscount) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_trajectory_csv(in, discount);
}

} // namespace hava
