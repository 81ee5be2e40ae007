#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <tuple>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hava/alignment.hpp"
#include "hava/core_mdp.hpp"
#include "hava/junction.hpp"

namespace hava::dd {

/// One observation for the envelope: where the human was, whether the
/// priority traffic had cleared, and the speed driven from there.
struct EnvelopeSample {
  double position_m = 0.0;
  bool cleared = false;
  double speed_kmh = 0.0;
};

struct BinConfig {
  double bin_width_m = 2.0;
  std::size_t bucket_count = 67;  // position buckets; the last one absorbs overflow
};

inline void to_json(nlohmann::json& j, const BinConfig& b) {
  j = {{"bin_width_m", b.bin_width_m}, {"bucket_count", b.bucket_count}};
}

inline void from_json(const nlohmann::json& j, BinConfig& b) {
  const BinConfig d;
  b.bin_width_m = j.value("bin_width_m", d.bin_width_m);
  b.bucket_count = j.value("bucket_count", d.bucket_count);
}

/// Bucket count covering a scenario's route with one spare bucket.
inline BinConfig bins_for(const junction::Scenario& sc, double bin_width_m = 2.0) {
  return {bin_width_m, static_cast<std::size_t>(std::ceil(sc.route_length_m / bin_width_m)) + 1};
}

/// Samples (s_t, speed driven during tick t) from a recorded trajectory.
inline std::vector<EnvelopeSample> samples_from(const Trajectory& t) {
  const std::vector<double> speeds = junction::speed_series(t);
  std::vector<EnvelopeSample> out;
  out.reserve(speeds.size());
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    const auto& obs = t.steps[i].state.obs;
    out.push_back({obs.at(junction::kObsPosition), obs.at(junction::kObsCleared) != 0.0, speeds[i]});
  }
  return out;
}

/// FNV-1a over the bit patterns of every sample, in order.
inline std::string dataset_hash(const std::vector<Trajectory>& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(dataset.size());
  for (const auto& t : dataset) {
    const auto samples = samples_from(t);
    mix(samples.size());
    for (const auto& s : samples) {
      mix(std::bit_cast<std::uint64_t>(s.position_m));
      mix(s.cleared ? 1U : 0U);
      mix(std::bit_cast<std::uint64_t>(s.speed_kmh));
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Binned min/max regression of human speeds over (position bucket, phase).
/// Bin index is bucket * 2 + phase, phase 1 meaning the priority traffic has
/// cleared the junction.
class SpeedEnvelopeModel {
 public:
  struct Bin {
    double v_min = 0.0;
    double v_max = 0.0;
    std::size_t samples = 0;
  };

  SpeedEnvelopeModel() = default;

  static SpeedEnvelopeModel fit(const std::vector<EnvelopeSample>& samples, const BinConfig& cfg,
                                std::string hash = {}) {
    if (samples.empty()) throw std::invalid_argument("speed envelope: empty dataset");
    if (!(cfg.bin_width_m > 0.0) || cfg.bucket_count == 0) {
      throw std::invalid_argument("speed envelope: bad bin config");
    }
    SpeedEnvelopeModel m;
    m.cfg_ = cfg;
    m.hash_ = std::move(hash);
    m.bins_.assign(cfg.bucket_count * 2, Bin{});
    for (const auto& s : samples) {
      Bin& b = m.bins_[m.bin_index(s.position_m, s.cleared)];
      if (b.samples == 0) {
        b.v_min = b.v_max = s.speed_kmh;
      } else {
        b.v_min = std::min(b.v_min, s.speed_kmh);
        b.v_max = std::max(b.v_max, s.speed_kmh);
      }
      ++b.samples;
    }
    m.sample_count_ = samples.size();
    m.build_fallback();
    return m;
  }

  static SpeedEnvelopeModel fit(const std::vector<Trajectory>& dataset, const BinConfig& cfg) {
    std::vector<EnvelopeSample> samples;
    for (const auto& t : dataset) {
      const auto s = samples_from(t);
      samples.insert(samples.end(), s.begin(), s.end());
    }
    return fit(samples, cfg, dataset_hash(dataset));
  }

  const BinConfig& bin_config() const { return cfg_; }
  const std::string& hash() const { return hash_; }
  std::size_t sample_count() const { return sample_count_; }
  std::size_t bin_count() const { return bins_.size(); }
  const Bin& bin(std::size_t index) const { return bins_.at(index); }

  std::size_t bucket_of(double position_m) const {
    const double b = std::floor(position_m / cfg_.bin_width_m);
    if (b <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(b), cfg_.bucket_count - 1);
  }

  std::size_t bin_index(double position_m, bool cleared) const {
    return bucket_of(position_m) * 2 + (cleared ? 1 : 0);
  }

  std::vector<std::size_t> empty_bins() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      if (bins_[i].samples == 0) out.push_back(i);
    }
    return out;
  }

  /// Bin whose envelope answers for `index`: itself if visited, otherwise
  /// the nearest visited bin by index, preferring the same position bucket
  /// and then the lower index.
  std::size_t resolved_bin(std::size_t index) const { return fallback_.at(index); }

  Interval envelope(double position_m, bool cleared) const {
    const Bin& b = bins_[resolved_bin(bin_index(position_m, cleared))];
    return {b.v_min, b.v_max};
  }

  Interval envelope(const EnvState& s) const {
    return envelope(s.obs.at(junction::kObsPosition), s.obs.at(junction::kObsCleared) != 0.0);
  }

  ActionSet predict(const EnvState& s) const {
    const Interval iv = envelope(s);
    return ActionSet::interval(iv.lo, iv.hi);
  }

  double dd_distance(double proposed_kmh, const EnvState& s) const {
    return min_distance(proposed_kmh, predict(s));
  }

  friend void to_json(nlohmann::json& j, const SpeedEnvelopeModel& m) {
    nlohmann::json bins = nlohmann::json::array();
    for (std::size_t i = 0; i < m.bins_.size(); ++i) {
      const Bin& b = m.bins_[i];
      if (b.samples == 0) continue;
      bins.push_back({{"index", i},
                      {"bucket", i / 2},
                      {"phase", i % 2},
                      {"v_min", b.v_min},
                      {"v_max", b.v_max},
                      {"samples", b.samples}});
    }
    j = {{"bins_config", m.cfg_},
         {"dataset_hash", m.hash_},
         {"sample_count", m.sample_count_},
         {"bin_count", m.bins_.size()},
         {"bins", bins},
         {"empty_bins", m.empty_bins()}};
  }

  friend void from_json(const nlohmann::json& j, SpeedEnvelopeModel& m) {
    m.cfg_ = j.at("bins_config").get<BinConfig>();
    m.hash_ = j.at("dataset_hash").get<std::string>();
    m.sample_count_ = j.at("sample_count").get<std::size_t>();
    m.bins_.assign(m.cfg_.bucket_count * 2, Bin{});
    for (const auto& b : j.at("bins")) {
      const auto i = b.at("index").get<std::size_t>();
      if (i >= m.bins_.size()) throw std::runtime_error("speed envelope: bin index out of range");
      m.bins_[i] = Bin{b.at("v_min").get<double>(), b.at("v_max").get<double>(),
                       b.at("samples").get<std::size_t>()};
      if (m.bins_[i].v_min > m.bins_[i].v_max || m.bins_[i].samples == 0) {
        throw std::runtime_error("speed envelope: malformed bin " + std::to_string(i));
      }
    }
    m.build_fallback();
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << nlohmann::json(*this).dump(2) << '\n';
  }

  static SpeedEnvelopeModel load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return nlohmann::json::parse(in).get<SpeedEnvelopeModel>();
  }

 private:
  void build_fallback() {
    fallback_.assign(bins_.size(), 0);
    std::vector<std::size_t> visited;
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      if (bins_[i].samples > 0) visited.push_back(i);
    }
    if (visited.empty()) throw std::invalid_argument("speed envelope: no visited bins");
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      std::size_t best = visited.front();
      auto rank = [i](std::size_t c) {
        const std::size_t dist = c > i ? c - i : i - c;
        const bool other_bucket = c / 2 != i / 2;
        return std::tuple{dist, other_bucket, c};
      };
      for (std::size_t c : visited) {
        if (rank(c) < rank(best)) best = c;
      }
      fallback_[i] = best;
    }
  }

  BinConfig cfg_;
  std::string hash_;
  std::size_t sample_count_ = 0;
  std::vector<Bin> bins_;
  std::vector<std::size_t> fallback_;
};

/// DD norm source backed by a fitted envelope.
inline NormFunction as_norm(SpeedEnvelopeModel model) {
  return [m = std::move(model)](const EnvState& s) { return m.predict(s); };
}

} // namespace hava::dd
