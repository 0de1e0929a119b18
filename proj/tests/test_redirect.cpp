#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "rdw/redirect.hpp"

using namespace rdw;
using namespace rdw::walk;

namespace {

class ConstantPredictor final : public Predictor {
 public:
  explicit ConstantPredictor(double p) : p_(p) {}
  std::vector<double> frame_probabilities(const Trace& script, std::span<const double>, double) const override {
    return std::vector<double>(script.size(), p_);
  }

 private:
  double p_;
};

WalkerState at(double x, double z, double heading) {
  WalkerState s;
  s.p_phys = {x, z};
  s.heading_phys = heading;
  return s;
}

SimConfig short_mission(double meters = 8.0) {
  SimConfig c;
  c.mission_distance = meters;
  return c;
}

}  // namespace

TEST(Gate, FiresOnKthConsecutivePositive) {
  RedirectionConfig cfg;
  const std::vector<double> prob{1, 1, 1, 1, 1, 1, 1, 1};
  const std::vector<double> head(prob.size(), 200.0);
  EXPECT_EQ(gate_events(prob, head, 120.0, cfg), (std::vector<std::size_t>{3}));
}

TEST(Gate, BrokenRunsRestartTheCount) {
  RedirectionConfig cfg;
  const std::vector<double> prob{1, 1, 1, 0, 1, 1, 1, 1};
  const std::vector<double> head(prob.size(), 200.0);
  EXPECT_EQ(gate_events(prob, head, 120.0, cfg), (std::vector<std::size_t>{7}));
}

TEST(Gate, HeadGateAndThresholdAreInclusive) {
  RedirectionConfig cfg;
  EXPECT_TRUE(Gate::positive(0.5, 150.0, cfg));
  EXPECT_FALSE(Gate::positive(0.4999, 150.0, cfg));
  EXPECT_FALSE(Gate::positive(0.9, 149.9, cfg));

  const std::vector<double> prob(6, 0.9);
  const std::vector<double> head{200, 200, 149, 200, 200, 200};
  EXPECT_TRUE(gate_events(prob, head, 120.0, cfg).empty());
}

TEST(Gate, RefractoryBlocksEventsInsideOneSecond) {
  RedirectionConfig cfg;
  cfg.k_consecutive = 1;
  const double rate = 10.0;
  const std::vector<double> prob(35, 1.0);
  const std::vector<double> head(prob.size(), 300.0);
  // run length only equals k once per run, so break the run every frame
  std::vector<double> pulsed(prob.size(), 0.0);
  for (std::size_t i = 0; i < pulsed.size(); i += 2) pulsed[i] = 1.0;
  EXPECT_EQ(gate_events(pulsed, head, rate, cfg), (std::vector<std::size_t>{0, 10, 20, 30}));
  EXPECT_EQ(gate_events(prob, head, rate, cfg), (std::vector<std::size_t>{0}));
}

TEST(Gate, ZeroRefractoryAllowsBackToBackRuns) {
  RedirectionConfig cfg;
  cfg.k_consecutive = 2;
  cfg.refractory = 0.0;
  const std::vector<double> prob{1, 1, 0, 1, 1};
  const std::vector<double> head(prob.size(), 300.0);
  EXPECT_EQ(gate_events(prob, head, 120.0, cfg), (std::vector<std::size_t>{1, 4}));
}

TEST(SteerToCenter, SignAndCap) {
  RedirectionConfig cfg;
  // at (1, 0) heading +z (90 deg); the centre is at 180 deg, so err = +90 -> gain -12.59
  auto s = at(1.0, 0.0, 90.0);
  const double g = steer_to_center_gain(s, Pts{}, cfg);
  EXPECT_DOUBLE_EQ(g, -12.59);
  s = apply_redirection(s, g);
  EXPECT_NEAR(s.heading_phys, 102.59, 1e-12);

  // small error is corrected exactly
  auto t = at(1.0, 0.0, 175.0);
  const double h = steer_to_center_gain(t, Pts{}, cfg);
  EXPECT_NEAR(h, -5.0, 1e-12);
  EXPECT_NEAR(apply_redirection(t, h).heading_phys, -180.0, 1e-12);

  EXPECT_EQ(steer_to_center_gain(at(0.0, 0.0, 30.0), Pts{}, cfg), 0.0);
  EXPECT_THROW(steer_to_center_gain(at(5.0, 0.0, 0.0), Pts{}, cfg), Error);
}

TEST(SteerToCenter, NeverIncreasesHeadingError) {
  RedirectionConfig cfg;
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    const auto s = at(rng.uniform(-1.7, 1.7), rng.uniform(-1.7, 1.7), rng.uniform(-180.0, 180.0));
    const double to_c = rad2deg(std::atan2(-s.p_phys.z, -s.p_phys.x));
    const double before = std::abs(wrap_deg(to_c - s.heading_phys));
    const double g = steer_to_center_gain(s, Pts{}, cfg);
    const double after = std::abs(wrap_deg(to_c - apply_redirection(s, g).heading_phys));
    EXPECT_LE(std::abs(g), cfg.max_gain_per_event);
    EXPECT_LE(after, before + 1e-9);
  }
}

TEST(ResetDue, TriggersWhenEnteringMarginTowardWall) {
  const Pts pts;
  const double lim = pts.half_width - pts.reset_margin;  // 1.45
  EXPECT_TRUE(reset_due(at(lim - 0.0005, 0.0, 0.0), pts, 0.001));
  EXPECT_FALSE(reset_due(at(lim - 0.01, 0.0, 0.0), pts, 0.001));
  // moving away from the wall while inside the band does not re-trigger
  EXPECT_FALSE(reset_due(at(lim + 0.05, 0.0, -180.0), pts, 0.001));
  // a step that leaves the PTS always triggers
  EXPECT_TRUE(reset_due(at(1.7499, 0.0, 0.0), pts, 0.001));
}

TEST(Reset2to1, FlipsHeadingNearBoundaryOnly) {
  const Pts pts;
  auto s = at(1.5, 0.0, 10.0);
  s = reset_2to1(s, pts, 0.001);
  EXPECT_NEAR(s.heading_phys, -170.0, 1e-12);
  EXPECT_EQ(s.resets, 1u);
  EXPECT_THROW(reset_2to1(at(0.0, 0.0, 0.0), pts, 0.001), Error);
}

TEST(Validate, RejectsBadSettings) {
  Pts p;
  p.reset_margin = 2.0;
  EXPECT_THROW(validate(p), Error);
  RedirectionConfig r;
  r.max_gain_per_event = -1.0;
  EXPECT_THROW(validate(r), Error);
  SimConfig c;
  c.walk_speed = 0.0;
  EXPECT_THROW(validate(c), Error);
}

TEST(Simulate, BaselineStaysInsideAndCountsResets) {
  const OraclePredictor oracle;
  RedirectionConfig off;
  off.enabled = false;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = simulate(oracle, Pts{}, off, SimConfig{}, seed);
    EXPECT_GE(r.resets, 8u) << "seed " << seed;
    EXPECT_TRUE(r.events.empty());
    EXPECT_EQ(r.reset_frames.size(), r.resets);
    EXPECT_NEAR(r.virt_distance, 38.0, 1e-6);
    for (const auto& p : r.phys_path) EXPECT_TRUE(Pts{}.contains(p, 1e-9));
  }
}

TEST(Simulate, VirtualPathIsStraight) {
  const OraclePredictor oracle;
  const auto r = simulate(oracle, Pts{}, RedirectionConfig{}, short_mission(), 3);
  const auto& end = r.virt_path.back();
  EXPECT_NEAR(std::hypot(end.x, end.z), 8.0, 1e-9);
  for (const auto& p : r.virt_path) EXPECT_NEAR(p.x * end.z - p.z * end.x, 0.0, 1e-9);
}

TEST(Simulate, SameSeedSameReport) {
  const OraclePredictor oracle;
  const auto a = simulate(oracle, Pts{}, RedirectionConfig{}, short_mission(), 9);
  const auto b = simulate(oracle, Pts{}, RedirectionConfig{}, short_mission(), 9);
  EXPECT_EQ(a.resets, b.resets);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) EXPECT_EQ(a.events[i].gain, b.events[i].gain);
  EXPECT_EQ(a.phys_path.back().x, b.phys_path.back().x);
}

TEST(Simulate, GainAccountingIsConsistent) {
  const ConstantPredictor always(1.0);
  const auto r = simulate(always, Pts{}, RedirectionConfig{}, short_mission(), 2);
  ASSERT_FALSE(r.events.empty());
  double total = 0.0;
  for (const auto& e : r.events) {
    total += std::abs(e.gain);
    EXPECT_LE(std::abs(e.gain), 12.59);
    EXPECT_GE(e.head_speed, kHeadGateSpeed);
  }
  EXPECT_EQ(r.total_abs_gain, total);
  EXPECT_EQ(r.mean_abs_gain, total / static_cast<double>(r.events.size()));
  EXPECT_EQ(r.redirections_per_second, static_cast<double>(r.events.size()) / r.wall_time);
  EXPECT_LE(r.redirections_per_second, 1.0);
  for (std::size_t i = 1; i < r.events.size(); ++i) EXPECT_GE(r.events[i].t - r.events[i - 1].t, 1.0);
}

TEST(Simulate, NeverPositiveMeansNoEvents) {
  const ConstantPredictor never(0.0);
  const auto r = simulate(never, Pts{}, RedirectionConfig{}, short_mission(), 2);
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.mean_abs_gain, 0.0);
}

TEST(Simulate, ZeroGainCapMatchesBaselineResets) {
  const ConstantPredictor always(1.0);
  RedirectionConfig zero;
  zero.max_gain_per_event = 0.0;
  RedirectionConfig off;
  off.enabled = false;
  const auto a = simulate(always, Pts{}, zero, short_mission(20.0), 6);
  const auto b = simulate(always, Pts{}, off, short_mission(20.0), 6);
  EXPECT_EQ(a.resets, b.resets);
  EXPECT_EQ(a.total_abs_gain, 0.0);
}

TEST(Simulate, TimeoutWhenMissionTooLong) {
  const OraclePredictor oracle;
  SimConfig c;
  c.max_frames = 1000;
  try {
    simulate(oracle, Pts{}, RedirectionConfig{}, c, 1);
    FAIL() << "expected timeout";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::timeout);
  }
}

TEST(ModelPredictor, BatchedMatchesPerWindow) {
  nn::Model m;
  Rng rng(8);
  m.net.init(rng);
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    m.normalizer.mean[j] = 0.0;
    m.normalizer.stddev[j] = 100.0;
  }
  const auto script = walking_script(SimConfig{}, 1200, 5);
  const auto head = head_speed_series(script);
  const ModelPredictor pred(m);
  const auto prob = pred.frame_probabilities(script, head, kHeadGateSpeed);
  const auto feats = featurize(script);
  std::size_t gated = 0;
  for (std::size_t f = 0; f < script.size(); ++f) {
    if (f < kWindowSize + 1 || head[f] < kHeadGateSpeed) {
      EXPECT_EQ(prob[f], 0.0);
      continue;
    }
    ++gated;
    std::vector<double> raw;
    for (std::size_t r = f - 10; r <= f - 2; ++r) {
      const auto v = feats[r].values();
      raw.insert(raw.end(), v.begin(), v.end());
    }
    EXPECT_NEAR(prob[f], m.predict(raw), 1e-12) << "frame " << f;
  }
  EXPECT_GT(gated, 0u);
}
