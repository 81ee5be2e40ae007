#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hava/alignment.hpp"
#include "hava/experiment.hpp"
#include "hava/grid_world.hpp"
#include "hava/junction.hpp"
#include "hava/q_learning.hpp"
#include "hava/run_config.hpp"
#include "hava/speed_envelope.hpp"
#include "hava/stats.hpp"
#include "hava/trajectory_io.hpp"

using namespace hava;
using nlohmann::json;

namespace {

/// Missing inputs from an earlier stage.
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

RunConfig load(const std::string& path, const Overrides& o) {
  RunConfig c = load_run_config(path);
  if (o.seed) {
    c.seed = *o.seed;
    c.seeds = {*o.seed};
    if (c.humans) c.humans->seed = *o.seed;
  }
  if (o.out) c.out = fs::absolute(*o.out);
  return c;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

const junction::Scenario& need_scenario(const RunConfig& c) {
  if (!c.scenario) throw ConfigError("config has no 'scenario'");
  return *c.scenario;
}

fs::path dataset_dir(const RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("config has no 'dataset' directory");
  return c.resolve(c.dataset);
}

/// Trajectory files of a directory in name order.
std::vector<fs::path> csv_files(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (e.path().extension() == ".csv" && name.rfind(prefix, 0) == 0) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Trajectory> load_humans(const RunConfig& c) {
  const fs::path dir = dataset_dir(c) / "trajectories";
  const auto files = csv_files(dir, "human_");
  if (files.empty()) {
    throw MissingArtifact("no human trajectories in " + dir.string() + "; run gen-humans first");
  }
  std::vector<Trajectory> out;
  for (const auto& f : files) out.push_back(read_trajectory_csv(f, c.gamma));
  return out;
}

dd::SpeedEnvelopeModel load_model(const RunConfig& c) {
  const fs::path p = c.dd_model_path();
  if (!fs::exists(p)) throw MissingArtifact("no DD model at " + p.string() + "; run fit-dd first");
  return dd::SpeedEnvelopeModel::load(p);
}

fs::path seed_dir(const RunConfig& c, std::uint64_t seed) {
  return c.out_dir() / ("seed_" + std::to_string(seed));
}

// toy-table ------------------------------------------------------------------------

int cmd_toy_table(const RunConfig& c, std::vector<double> alphas) {
  if (alphas.empty()) alphas = c.alphas;
  if (alphas.empty()) {
    std::cerr << "toy-table: no alpha values (give --alpha or 'alphas' in the config)\n";
    return 2;
  }
  if (c.grid_map.empty() || c.reference_policies.empty()) {
    throw ConfigError("toy-table needs 'grid_map' and 'reference_policies'");
  }
  const auto grid = grid::GridWorld::load(c.resolve(c.grid_map));
  const auto policies = grid::load_reference_policies(c.resolve(c.reference_policies));

  std::ostringstream csv;
  csv << "alpha,recovery_steps";
  for (const auto& p : policies) csv << ',' << p.name;
  csv << ",best\n";
  std::cout << std::left << std::setw(8) << "alpha" << std::setw(7) << "steps";
  for (const auto& p : policies) std::cout << std::setw(9) << p.name;
  std::cout << "best\n";
  for (double a : alphas) {
    const auto returns = grid::evaluate_reference_policies(grid, policies, a, c.gamma);
    const auto best = static_cast<std::size_t>(
        std::max_element(returns.begin(), returns.end()) - returns.begin());
    const auto steps = recovery_steps(a);
    const std::string steps_s = steps ? std::to_string(*steps) : "inf";
    csv << a << ',' << steps_s;
    std::cout << std::setw(8) << a << std::setw(7) << steps_s;
    for (double r : returns) {
      csv << ',' << fixed(r, 4);
      std::cout << std::setw(9) << fixed(r, 2);
    }
    csv << ',' << policies[best].name << '\n';
    std::cout << policies[best].name << '\n';
  }
  const fs::path path = c.out_dir() / "table1.csv";
  fs::create_directories(path.parent_path());
  std::ofstream(path) << csv.str();
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

// reputation-trace -----------------------------------------------------------------

int cmd_reputation_trace(const RunConfig& c, std::vector<double> alphas) {
  if (alphas.empty()) alphas = c.alphas;
  if (alphas.empty()) {
    std::cerr << "reputation-trace: no alpha values\n";
    return 2;
  }
  const fs::path path = c.out_dir() / "reputation_trace.csv";
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "step";
  for (double a : alphas) out << ",alpha_" << a;
  out << '\n' << std::setprecision(10);
  std::vector<double> w(alphas.size(), 1.0);
  for (std::size_t t = 0; t <= c.trace_steps; ++t) {
    out << t;
    for (double v : w) out << ',' << v;
    out << '\n';
    const bool violate =
        std::find(c.violation_steps.begin(), c.violation_steps.end(), t) != c.violation_steps.end();
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      w[i] = update_reputation(w[i], violate ? 0.0 : 1.0, alphas[i]);
    }
  }
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

// gen-humans -----------------------------------------------------------------------

int cmd_gen_humans(const RunConfig& c) {
  const auto& sc = need_scenario(c);
  if (!c.humans) throw ConfigError("config has no 'humans' section");
  const auto episodes = junction::generate_human_dataset(sc, *c.humans);
  const fs::path dir = c.out_dir();
  const fs::path traj_dir = dir / "trajectories";
  for (const auto& f : csv_files(traj_dir, "human_")) fs::remove(f);

  std::vector<Trajectory> trajectories;
  std::vector<double> finish;
  json realised = json::array();
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "human_%04zu.csv", i);
    write_trajectory_csv(traj_dir / name, episodes[i].trajectory, junction::state_columns());
    trajectories.push_back(episodes[i].trajectory);
    finish.push_back(junction::finish_time(episodes[i].trajectory));
    realised.push_back({{"file", name},
                        {"profile", episodes[i].profile_index},
                        {"realised", episodes[i].realised},
                        {"finish_time", finish.back()},
                        {"collisions", episodes[i].trajectory.collisions}});
  }
  const auto [lo, hi] = std::minmax_element(finish.begin(), finish.end());
  json manifest = {{"experiment", c.experiment},
                   {"command", "gen-humans"},
                   {"scenario", sc},
                   {"humans", *c.humans},
                   {"count", episodes.size()},
                   {"dataset_hash", dd::dataset_hash(trajectories)},
                   {"finish_time", {{"min", *lo}, {"max", *hi}, {"median", stats::median_of(finish)}}},
                   {"episodes", realised}};
  write_json_file(dir / "manifest.json", manifest);
  std::cout << "generated " << episodes.size() << " human trajectories in " << traj_dir.string()
            << "\nfinish time " << *lo << ".." << *hi << " ticks, median "
            << stats::median_of(finish) << "\ndataset hash " << manifest["dataset_hash"].get<std::string>()
            << '\n';
  return 0;
}

// fit-dd ---------------------------------------------------------------------------

int cmd_fit_dd(const RunConfig& c, bool force) {
  const auto& sc = need_scenario(c);
  const auto humans = load_humans(c);
  const fs::path path = c.dd_model_path();
  const std::string hash = dd::dataset_hash(humans);
  if (fs::exists(path) && !force) {
    const auto old = dd::SpeedEnvelopeModel::load(path);
    if (old.hash() != hash) {
      std::cerr << "fit-dd: " << path.string() << " was fitted on dataset " << old.hash()
                << " but the dataset is now " << hash << "; pass --force to refit\n";
      return 3;
    }
  }
  const auto model = dd::SpeedEnvelopeModel::fit(humans, dd::bins_for(sc));
  model.save(path);
  std::cout << "fitted envelope on " << model.sample_count() << " samples, "
            << model.bin_count() - model.empty_bins().size() << "/" << model.bin_count()
            << " bins visited\nwrote " << path.string() << '\n';
  return 0;
}

// train ----------------------------------------------------------------------------

int train_grid(const RunConfig& c) {
  if (c.grid_map.empty()) throw ConfigError("grid training needs 'grid_map'");
  const auto grid = grid::GridWorld::load(c.resolve(c.grid_map));
  const bool rb = c.variant != Variant::kDdOnly;
  const bool dd = c.variant != Variant::kRbOnly;
  std::ofstream curves;
  fs::create_directories(c.out_dir());
  curves.open(c.out_dir() / "curves.csv");
  curves << "seed,episode,finish_time,return,mean_w\n" << std::setprecision(10);
  for (auto seed : c.seeds) {
    auto cfg = c.train;
    cfg.seed = seed;
    auto env = wrap(grid, grid::grid_alignment_value(grid, c.alpha, rb, dd), c.gamma);
    const auto key = grid_state_key(grid, cfg.reputation_buckets);
    const auto result = rl::train(env, cfg, key);
    const fs::path dir = seed_dir(c, seed);
    rl::save_q_table(dir / "q_table.json", result.q);
    rl::write_curve_csv(dir / "curves.csv", result.curve);
    for (const auto& p : result.curve) {
      curves << seed << ',' << p.episode << ',' << p.finish_time << ',' << p.ret << ',' << p.mean_w << '\n';
    }
    const auto greedy = rollout(rl::greedy_policy(result.q, key), env, cfg.max_steps);
    write_trajectory_csv(dir / "trajectories" / "greedy.csv", greedy, {"x", "y"});
    std::cout << "seed " << seed << ": greedy return " << fixed(discounted_return(greedy), 3)
              << " in " << greedy.length() << " steps\n";
  }
  return 0;
}

int cmd_train(const RunConfig& c) {
  if (c.environment == EnvKind::kGrid) return train_grid(c);
  const auto& sc = need_scenario(c);
  std::optional<dd::SpeedEnvelopeModel> model;
  if (c.needs_dd()) model = load_model(c);
  const auto marks = snapshot_episodes(c.train.episodes, c.eval);

  fs::create_directories(c.out_dir());
  std::ofstream curves(c.out_dir() / "curves.csv");
  curves << "seed,episode,finish_time,return,mean_w\n" << std::setprecision(10);
  json seeds = json::array();
  for (auto seed : c.seeds) {
    auto cfg = c.train;
    cfg.seed = seed;
    const auto run = run_junction(sc, model ? &*model : nullptr, c.variant, c.tau, c.alpha, c.gamma,
                                  cfg, c.eval);
    const fs::path dir = seed_dir(c, seed);
    for (const auto& f : csv_files(dir / "trajectories", "")) fs::remove(f);
    rl::save_q_table(dir / "q_table.json", run.training.q);
    rl::write_curve_csv(dir / "curves.csv", run.training.curve);
    for (const auto& p : run.training.curve) {
      curves << seed << ',' << p.episode << ',' << p.finish_time << ',' << p.ret << ',' << p.mean_w << '\n';
    }
    write_trajectory_csv(dir / "trajectories" / "greedy.csv", run.greedy, junction::state_columns());
    json snaps = json::array();
    for (std::size_t i = 0; i < run.snapshots.size(); ++i) {
      char name[40];
      std::snprintf(name, sizeof name, "snapshot_%06zu.csv", marks[i]);
      write_trajectory_csv(dir / "trajectories" / name, run.snapshots[i], junction::state_columns());
      snaps.push_back({{"episode", marks[i]}, {"file", name}, {"finish_time", run.snapshots[i].length()}});
    }
    seeds.push_back({{"seed", seed},
                     {"greedy_finish_time", run.greedy.length()},
                     {"greedy_collisions", run.greedy.collisions},
                     {"greedy_truncated", run.greedy.truncated},
                     {"q_states", run.training.q.size()},
                     {"snapshots", snaps}});
    std::cout << "seed " << seed << ": greedy finish " << run.greedy.length() << " ticks, "
              << run.greedy.collisions << " collisions, " << run.training.q.size() << " states\n";
  }
  json manifest = {{"experiment", c.experiment},
                   {"command", "train"},
                   {"variant", variant_name(c.variant)},
                   {"tau", c.tau},
                   {"alpha", c.alpha},
                   {"gamma", c.gamma},
                   {"train", c.train},
                   {"eval", c.eval},
                   {"scenario", sc},
                   {"dd_model_hash", model ? json(model->hash()) : json(nullptr)},
                   {"seeds", seeds}};
  write_json_file(c.out_dir() / "manifest.json", manifest);
  return 0;
}

// eval -----------------------------------------------------------------------------

int cmd_eval(const RunConfig& c) {
  if (c.environment != EnvKind::kJunction) throw ConfigError("eval supports the junction only");
  const auto& sc = need_scenario(c);
  const auto humans = load_humans(c);
  std::vector<Trajectory> agent;
  std::vector<double> greedy_finish;
  std::size_t collisions = 0;
  double max_speed = 0.0;
  for (auto seed : c.seeds) {
    const fs::path dir = seed_dir(c, seed) / "trajectories";
    const auto snaps = csv_files(dir, "snapshot_");
    if (snaps.empty() || !fs::exists(dir / "greedy.csv")) {
      throw MissingArtifact("no trained policy for seed " + std::to_string(seed) + " under " +
                            dir.string() + "; run train first");
    }
    for (const auto& f : snaps) agent.push_back(read_trajectory_csv(f, c.gamma));
    greedy_finish.push_back(junction::finish_time(read_trajectory_csv(dir / "greedy.csv", c.gamma)));
  }
  for (const auto& t : agent) {
    for (double v : junction::speed_series(t)) max_speed = std::max(max_speed, v);
    for (std::size_t i = 0; i < t.length(); ++i) {
      const auto js = junction::from_env_state(i + 1 < t.length() ? t.steps[i + 1].state : t.final_state);
      if (junction::ego_in_zone(sc, js.ego_position_m) && js.junction_occupied) {
        ++collisions;
      }
    }
  }
  const auto ks = stats::align_test(agent, humans, stats::Feature::kFinishTime);
  const auto viol = stats::violation_stats(agent, humans);
  double mean = 0.0;
  for (double f : greedy_finish) mean += f;
  mean /= static_cast<double>(greedy_finish.size());
  const bool aligned = stats::value_aligned(ks);

  json report = {{"experiment", c.experiment},
                 {"variant", variant_name(c.variant)},
                 {"alpha", c.alpha},
                 {"tau", c.tau},
                 {"seeds", c.seeds},
                 {"agent_trajectories", agent.size()},
                 {"human_trajectories", humans.size()},
                 {"greedy_finish_times", greedy_finish},
                 {"greedy_finish_mean", mean},
                 {"agent_finish_times", stats::feature_sample(agent, stats::Feature::kFinishTime)},
                 {"ks_finish_time", ks},
                 {"value_aligned", aligned},
                 {"verdict", aligned ? "value aligned" : "not value aligned"},
                 {"violation", viol},
                 {"max_speed_kmh", max_speed},
                 {"collision_ticks", collisions}};
  write_json_file(c.out_dir() / "eval_report.json", report);
  std::cout << c.experiment << ": greedy finish mean " << fixed(mean, 1) << ", KS D "
            << fixed(ks.statistic, 3) << " p " << ks.p_value << " -> "
            << report["verdict"].get<std::string>() << "\nviolation median "
            << viol.median << " km/h, mean " << fixed(viol.mean, 3) << " km/h\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reputation-weighted value alignment experiments"};
  app.require_subcommand(1);
  std::string config;
  Overrides ov;
  std::vector<double> alphas;
  bool force = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { ov.seed = s; },
                                            "override the seed");
    sub->add_option_function<std::string>("--out", [&](const std::string& o) { ov.out = o; },
                                          "override the output directory");
  };
  auto* toy = app.add_subcommand("toy-table", "returns of the reference grid policies per alpha");
  common(toy);
  toy->add_option("--alpha", alphas, "alpha values (default: config 'alphas')");
  auto* gen = app.add_subcommand("gen-humans", "generate the simulated human dataset");
  common(gen);
  auto* fit = app.add_subcommand("fit-dd", "fit the speed envelope on the human dataset");
  common(fit);
  fit->add_flag("--force", force, "refit even if the dataset hash changed");
  auto* train = app.add_subcommand("train", "train tabular agents, one per seed");
  common(train);
  auto* eval = app.add_subcommand("eval", "KS and envelope-violation report for trained agents");
  common(eval);
  auto* trace = app.add_subcommand("reputation-trace", "reputation after violations per alpha");
  common(trace);
  trace->add_option("--alpha", alphas, "alpha values (default: config 'alphas')");

  CLI11_PARSE(app, argc, argv);
  try {
    const RunConfig c = load(config, ov);
    if (toy->parsed()) return cmd_toy_table(c, alphas);
    if (gen->parsed()) return cmd_gen_humans(c);
    if (fit->parsed()) return cmd_fit_dd(c, force);
    if (train->parsed()) return cmd_train(c);
    if (eval->parsed()) return cmd_eval(c);
    if (trace->parsed()) return cmd_reputation_trace(c, alphas);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
