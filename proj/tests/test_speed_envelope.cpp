#include <gtest/gtest.h>

#include "hava/speed_envelope.hpp"
#include "support.hpp"

using namespace hava;
using namespace hava::dd;
using hava::testing::Gen;

namespace {

std::vector<Trajectory> human_trajectories() {
  std::vector<Trajectory> out;
  for (auto& e : junction::generate_human_dataset(hava::testing::reference_scenario(), hava::testing::reference_humans())) {
    out.push_back(std::move(e.trajectory));
  }
  return out;
}

EnvState state_at(double x, bool cleared) {
  junction::JunctionState s;
  s.ego_position_m = x;
  s.crossing_cleared = cleared;
  return junction::to_env_state(s, false);
}

} // namespace

TEST(Envelope, ConstantSpeedGivesDegenerateBins) {
  std::vector<EnvelopeSample> samples;
  for (int i = 0; i < 50; ++i) samples.push_back({i * 0.8, i > 25, 30.0});
  const auto m = SpeedEnvelopeModel::fit(samples, BinConfig{2.0, 30});
  for (std::size_t b = 0; b < m.bin_count(); ++b) {
    if (m.bin(b).samples == 0) continue;
    EXPECT_EQ(m.bin(b).v_min, 30.0);
    EXPECT_EQ(m.bin(b).v_max, 30.0);
  }
}

TEST(Envelope, ContainsTheDatasetMaximum) {
  const auto sc = hava::testing::reference_scenario();
  std::vector<Trajectory> data{junction::drive_human(sc, {45.0, 1.0, std::nullopt}),
                               junction::drive_human(sc, {55.0, 1.0, std::nullopt})};
  const auto m = SpeedEnvelopeModel::fit(data, bins_for(sc));
  double top = 0.0;
  for (std::size_t b = 0; b < m.bin_count(); ++b) top = std::max(top, m.bin(b).v_max);
  EXPECT_EQ(top, 55.0);
}

TEST(Envelope, YieldBinsStartAtZero) {
  const auto sc = hava::testing::reference_scenario();
  const auto m = SpeedEnvelopeModel::fit(human_trajectories(), bins_for(sc));
  const auto iv = m.envelope(sc.junction_position_m - 1.0, false);
  // braking onto the line only approaches standstill
  EXPECT_NEAR(iv.lo, 0.0, 1e-9);
  EXPECT_LT(iv.hi, 15.0);
}

TEST(Envelope, DistanceExamples) {
  std::vector<EnvelopeSample> samples{{1.0, false, 20.0}, {1.5, false, 40.0}};
  const auto m = SpeedEnvelopeModel::fit(samples, BinConfig{2.0, 4});
  const auto s = state_at(1.0, false);
  EXPECT_EQ(m.dd_distance(30.0, s), 0.0);
  EXPECT_EQ(m.dd_distance(43.0, s), 3.0);
  EXPECT_EQ(m.dd_distance(15.0, s), 5.0);
}

TEST(Envelope, SoundOnEveryTrainingSample) {
  const auto sc = hava::testing::reference_scenario();
  const auto data = human_trajectories();
  const auto m = SpeedEnvelopeModel::fit(data, bins_for(sc));
  std::size_t checked = 0;
  for (const auto& t : data) {
    const auto speeds = junction::speed_series(t);
    for (std::size_t i = 0; i < t.length(); ++i) {
      ASSERT_EQ(m.dd_distance(speeds[i], t.steps[i].state), 0.0);
      ++checked;
    }
  }
  EXPECT_GE(checked, 10000u);
}

TEST(Envelope, MonotoneUnderDatasetGrowth) {
  Gen g(31);
  for (int round = 0; round < 200; ++round) {
    std::vector<EnvelopeSample> samples;
    const std::size_t n = 1 + g.index(60);
    for (std::size_t i = 0; i < n; ++i) samples.push_back({g.uniform(0.0, 40.0), g.coin(), g.uniform(0.0, 60.0)});
    const BinConfig cfg{2.0, 21};
    const auto small = SpeedEnvelopeModel::fit(samples, cfg);
    for (std::size_t i = 0; i < 1 + g.index(30); ++i) {
      samples.push_back({g.uniform(0.0, 40.0), g.coin(), g.uniform(0.0, 60.0)});
    }
    const auto big = SpeedEnvelopeModel::fit(samples, cfg);
    for (std::size_t b = 0; b < small.bin_count(); ++b) {
      if (small.bin(b).samples == 0) continue;
      ASSERT_LE(big.bin(b).v_min, small.bin(b).v_min);
      ASSERT_GE(big.bin(b).v_max, small.bin(b).v_max);
    }
  }
}

TEST(Envelope, FitIsDeterministicAndRoundTrips) {
  const auto sc = hava::testing::reference_scenario();
  const auto data = human_trajectories();
  const auto a = SpeedEnvelopeModel::fit(data, bins_for(sc));
  const auto b = SpeedEnvelopeModel::fit(data, bins_for(sc));
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
  const auto dir = hava::testing::temp_dir("envelope");
  a.save(dir / "dd_model.json");
  const auto c = SpeedEnvelopeModel::load(dir / "dd_model.json");
  EXPECT_EQ(nlohmann::json(c).dump(), nlohmann::json(a).dump());
  EXPECT_EQ(c.hash(), dataset_hash(data));
}

TEST(Envelope, HashTracksTheData) {
  auto data = human_trajectories();
  const auto h = dataset_hash(data);
  data.pop_back();
  EXPECT_NE(dataset_hash(data), h);
}

TEST(Envelope, EmptyBinsFallBackToNearestVisited) {
  // visited: bucket 1 cleared (index 3) and bucket 4 pending (index 8)
  std::vector<EnvelopeSample> samples{{2.5, true, 10.0}, {8.5, false, 30.0}};
  const auto m = SpeedEnvelopeModel::fit(samples, BinConfig{2.0, 6});
  EXPECT_EQ(m.empty_bins().size(), 10u);
  EXPECT_EQ(m.resolved_bin(3), 3u);
  EXPECT_EQ(m.resolved_bin(2), 3u);   // same bucket wins the tie with nothing
  EXPECT_EQ(m.resolved_bin(0), 3u);
  EXPECT_EQ(m.resolved_bin(6), 8u);   // distance 2 to index 8, 3 to index 3
  EXPECT_EQ(m.resolved_bin(11), 8u);
  const auto iv = m.envelope(100.0, true);  // overflow bucket
  EXPECT_EQ(iv.lo, 30.0);
}

TEST(Envelope, FallbackPrefersSameBucketThenLowerIndex) {
  // index 4 (bucket 2 pending) and index 7 (bucket 3 cleared) are visited;
  // index 5 and 6 are each one away from one of them.
  std::vector<EnvelopeSample> samples{{4.5, false, 1.0}, {6.5, true, 2.0}};
  const auto m = SpeedEnvelopeModel::fit(samples, BinConfig{2.0, 5});
  EXPECT_EQ(m.resolved_bin(5), 4u);
  EXPECT_EQ(m.resolved_bin(6), 7u);
  // equidistant from 4 and 8 with neither in bucket 3 of index 6: lower index
  std::vector<EnvelopeSample> two{{4.5, false, 1.0}, {8.5, false, 2.0}};
  const auto m2 = SpeedEnvelopeModel::fit(two, BinConfig{2.0, 5});
  EXPECT_EQ(m2.resolved_bin(6), 4u);
}

TEST(Envelope, RejectsBadInput) {
  EXPECT_THROW(SpeedEnvelopeModel::fit(std::vector<EnvelopeSample>{}, BinConfig{}), std::invalid_argument);
  EXPECT_THROW(SpeedEnvelopeModel::fit({{1.0, false, 1.0}}, BinConfig{0.0, 3}), std::invalid_argument);
  nlohmann::json bad = nlohmann::json(SpeedEnvelopeModel::fit({{1.0, false, 1.0}}, BinConfig{2.0, 3}));
  bad["bins"][0]["v_min"] = 5.0;
  EXPECT_THROW(bad.get<SpeedEnvelopeModel>(), std::runtime_error);
}
