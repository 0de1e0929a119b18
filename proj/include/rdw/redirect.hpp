#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "rdw/error.hpp"
#include "rdw/kinematics.hpp"
#include "rdw/labeling.hpp"
#include "rdw/nn/model_io.hpp"
#include "rdw/random.hpp"
#include "rdw/synthgen.hpp"

namespace rdw::walk {

struct Vec2 {
  double x = 0.0;
  double z = 0.0;
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Unit step direction for a heading in degrees, counter-clockwise from +x.
inline Vec2 heading_dir(double heading_deg) {
  const double r = deg2rad(heading_deg);
  return {std::cos(r), std::sin(r)};
}

/// Rectangular physical tracked space centred on the origin.
struct Pts {
  double half_width = 1.75;  // along x
  double half_depth = 1.75;  // along z
  double reset_margin = 0.3;

  bool contains(Vec2 p, double inflate = 0.0) const {
    return std::abs(p.x) <= half_width + inflate && std::abs(p.z) <= half_depth + inflate;
  }
  bool in_margin(Vec2 p) const {
    return std::abs(p.x) > half_width - reset_margin || std::abs(p.z) > half_depth - reset_margin;
  }
  double longest_straight() const { return 2.0 * std::hypot(half_width, half_depth); }
};

inline void validate(const Pts& pts) {
  require(pts.half_width > 0.0 && pts.half_depth > 0.0, "PTS extents must be positive");
  require(pts.reset_margin >= 0.0 && pts.reset_margin < std::min(pts.half_width, pts.half_depth),
          "reset_margin must be smaller than the PTS half extents");
}

struct WalkerState {
  Vec2 p_phys;
  double heading_phys = 0.0;  // degrees, [-180, 180)
  Vec2 p_virt;
  double heading_virt = 0.0;
  double t = 0.0;
  std::size_t resets = 0;
};

struct RedirectionConfig {
  std::size_t k_consecutive = 4;
  double max_gain_per_event = 12.59;  // degrees
  double refractory = 1.0;            // seconds
  double threshold = 0.5;             // probability for a positive frame
  double head_gate = kHeadGateSpeed;  // deg/s, inclusive
  bool enabled = true;                // false gives the reset-only baseline
};

inline void validate(const RedirectionConfig& c) {
  require(c.k_consecutive >= 1, "k_consecutive must be at least 1");
  require(c.max_gain_per_event >= 0.0 && std::isfinite(c.max_gain_per_event),
          "max_gain_per_event must be finite and nonnegative");
  require(c.refractory >= 0.0, "refractory must be nonnegative");
}

/// Fires on the k-th consecutive gated positive, at most once per refractory period.
class Gate {
 public:
  explicit Gate(const RedirectionConfig& cfg) : cfg_(cfg) {}

  static bool positive(double prob, double head_speed, const RedirectionConfig& cfg) {
    return prob >= cfg.threshold && head_speed >= cfg.head_gate;
  }

  bool step(double prob, double head_speed, double t) {
    run_ = positive(prob, head_speed, cfg_) ? run_ + 1 : 0;
    if (run_ != cfg_.k_consecutive) return false;
    if (t - last_event_ < cfg_.refractory) return false;
    last_event_ = t;
    return true;
  }

 private:
  RedirectionConfig cfg_;
  std::size_t run_ = 0;
  double last_event_ = -std::numeric_limits<double>::infinity();
};

/// Frame indices at which the gate fires for frame-aligned streams.
inline std::vector<std::size_t> gate_events(std::span<const double> prob, std::span<const double> head_speed,
                                            double rate_hz, const RedirectionConfig& cfg) {
  require(prob.size() == head_speed.size(), "gate: streams are not frame-aligned");
  require(rate_hz > 0.0, "gate: rate_hz must be positive");
  validate(cfg);
  Gate gate(cfg);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < prob.size(); ++i)
    if (gate.step(prob[i], head_speed[i], static_cast<double>(i) / rate_hz)) out.push_back(i);
  return out;
}

/// Signed world rotation that turns the physical heading toward the PTS centre, capped.
///
/// Applying gain g turns heading_phys by -g, so the sign is opposite to the heading error.
inline double steer_to_center_gain(const WalkerState& s, const Pts& pts, const RedirectionConfig& cfg) {
  require(pts.contains(s.p_phys), "steer_to_center_gain: walker is outside the PTS");
  const double r2 = s.p_phys.x * s.p_phys.x + s.p_phys.z * s.p_phys.z;
  if (r2 == 0.0) return 0.0;
  const double to_center = rad2deg(std::atan2(-s.p_phys.z, -s.p_phys.x));
  const double err = wrap_deg(to_center - s.heading_phys);
  if (err == 0.0) return 0.0;
  const double mag = std::min(std::abs(err), cfg.max_gain_per_event);
  return err > 0.0 ? -mag : mag;
}

inline WalkerState apply_redirection(WalkerState s, double gain) {
  require(std::isfinite(gain), "apply_redirection: gain must be finite");
  s.heading_phys = wrap_deg(s.heading_phys - gain);
  return s;
}

/// True when the next step of length step_len enters the margin band while moving
/// toward that wall, or leaves the PTS.
inline bool reset_due(const WalkerState& s, const Pts& pts, double step_len) {
  const Vec2 d = heading_dir(s.heading_phys);
  const Vec2 n{s.p_phys.x + step_len * d.x, s.p_phys.z + step_len * d.z};
  const double lim_x = pts.half_width - pts.reset_margin;
  const double lim_z = pts.half_depth - pts.reset_margin;
  const bool enter_x = std::abs(n.x) > lim_x && std::abs(s.p_phys.x) <= lim_x && n.x * d.x > 0.0;
  const bool enter_z = std::abs(n.z) > lim_z && std::abs(s.p_phys.z) <= lim_z && n.z * d.z > 0.0;
  return enter_x || enter_z || !pts.contains(n);
}

/// 2:1 turn: the body turns 180 degrees while the scene turns 360, so only heading_phys flips.
inline WalkerState reset_2to1(WalkerState s, const Pts& pts, double step_len) {
  if (!pts.in_margin(s.p_phys) && !reset_due(s, pts, step_len))
    fail(ErrorKind::invalid_argument, "reset_2to1: walker is not near a PTS boundary");
  s.heading_phys = wrap_deg(s.heading_phys + 180.0);
  ++s.resets;
  return s;
}

// ---- predictors ----------------------------------------------------------------

/// Per-frame saccade probabilities for a head-motion script.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<double> frame_probabilities(const Trace& script, std::span<const double> head_speed,
                                                  double head_gate) const = 0;
};

/// Ground-truth labels of the script (requires gaze), as probabilities 0 or 1.
class OraclePredictor final : public Predictor {
 public:
  std::vector<double> frame_probabilities(const Trace& script, std::span<const double>,
                                          double) const override {
    const auto labels = label_trace(script);
    return {labels.labels.begin(), labels.labels.end()};
  }
};

/// The trained network on head features only. Frames below the head gate, and the
/// first frames without a full window, get probability 0 without running the net.
class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(nn::Model model) : model_(std::move(model)) {}

  std::vector<double> frame_probabilities(const Trace& script, std::span<const double> head_speed,
                                          double head_gate) const override {
    require(head_speed.size() == script.size(), "predictor: head speed stream length mismatch");
    std::vector<double> prob(script.size(), 0.0);
    const auto feats = featurize(script);  // feats[i] is frame i + 2
    std::vector<std::size_t> gated;
    for (std::size_t f = kWindowSize + 1; f < script.size(); ++f)
      if (head_speed[f] >= head_gate) gated.push_back(f);
    constexpr std::size_t kChunk = 512;
    nn::Mat<double> raw;
    for (std::size_t start = 0; start < gated.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, gated.size() - start);
      raw.resize(static_cast<Eigen::Index>(Dataset::kStride), static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t first = gated[start + j] - 2 - (kWindowSize - 1);
        for (std::size_t r = 0; r < kWindowSize; ++r) {
          const auto v = feats[first + r].values();
          for (std::size_t c = 0; c < kFeatureCount; ++c)
            raw(static_cast<Eigen::Index>(r * kFeatureCount + c), static_cast<Eigen::Index>(j)) = v[c];
        }
      }
      const auto p = model_.predict_batch(raw);
      for (std::size_t j = 0; j < n; ++j) prob[gated[start + j]] = p[j];
    }
    return prob;
  }

 private:
  nn::Model model_;
};

// ---- simulation ------------------------------------------------------------------

struct SimConfig {
  double mission_distance = 38.0;  // meters of straight virtual walking
  double walk_speed = 0.1;         // m/s
  double rate_hz = 120.0;
  double head_targets_per_minute = 140.0;
  std::size_t path_stride = 12;  // record every n-th frame of the polylines
  std::size_t max_frames = 5'000'000;
};

inline void validate(const SimConfig& c) {
  require(c.mission_distance >= 0.0 && std::isfinite(c.mission_distance), "mission_distance must be finite");
  require(c.walk_speed > 0.0 && std::isfinite(c.walk_speed), "walk_speed must be positive");
  require(c.rate_hz > 0.0, "rate_hz must be positive");
  require(c.path_stride >= 1, "path_stride must be at least 1");
  require(c.head_targets_per_minute >= 0.0, "head_targets_per_minute must be nonnegative");
}

struct RedirectEvent {
  std::size_t frame = 0;
  double t = 0.0;
  double gain = 0.0;  // degrees
  double head_speed = 0.0;
};

struct SimReport {
  std::size_t resets = 0;
  double virt_distance = 0.0;
  std::vector<Vec2> phys_path;
  std::vector<Vec2> virt_path;
  double wall_time = 0.0;  // simulated seconds
  std::size_t frames = 0;
  std::vector<RedirectEvent> events;
  double total_abs_gain = 0.0;
  double mean_abs_gain = 0.0;
  double redirections_per_second = 0.0;
  std::vector<std::size_t> reset_frames;
};

/// Synthetic head-motion script long enough for the whole mission.
inline Trace walking_script(const SimConfig& cfg, std::size_t frames, std::uint64_t seed,
                            const synth::OculomotorParams& ocu = {}) {
  synth::TaskConfig task;
  task.rate_hz = cfg.rate_hz;
  task.duration = static_cast<double>(frames + 1) / cfg.rate_hz + 1.0;
  task.targets_per_minute = cfg.head_targets_per_minute;
  task.seed = seed;
  return synth::generate_session(task, ocu);
}

/// Walks a straight virtual line of mission_distance at walk_speed, one step per frame.
///
/// The generator seeded with `seed` draws the initial heading and then the seed of the
/// head-motion script, so a baseline and a redirected run on one seed see the same head.
inline SimReport simulate(const Predictor& predictor, const Pts& pts, const RedirectionConfig& rcfg,
                          const SimConfig& cfg, std::uint64_t seed) {
  validate(pts);
  validate(rcfg);
  validate(cfg);
  const double step = cfg.walk_speed / cfg.rate_hz;
  const double need = std::ceil(cfg.mission_distance / step - 1e-9);
  if (need > static_cast<double>(cfg.max_frames))
    fail(ErrorKind::timeout, "simulate: mission needs " + std::to_string(static_cast<std::uint64_t>(need)) +
                                 " frames, above the cap of " + std::to_string(cfg.max_frames));
  const auto frames = static_cast<std::size_t>(need);

  Rng rng(seed);
  WalkerState s;
  s.heading_phys = wrap_deg(rng.uniform(-180.0, 180.0));
  s.heading_virt = s.heading_phys;
  const std::uint64_t script_seed = rng.next_u64();

  std::vector<double> prob, head_speed;
  if (rcfg.enabled && frames > 0) {
    const Trace script = walking_script(cfg, frames, script_seed);
    head_speed = head_speed_series(script);
    prob = predictor.frame_probabilities(script, head_speed, rcfg.head_gate);
  }

  SimReport rep;
  Gate gate(rcfg);
  const Vec2 vdir = heading_dir(s.heading_virt);
  rep.phys_path.push_back(s.p_phys);
  rep.virt_path.push_back(s.p_virt);
  for (std::size_t i = 0; i < frames; ++i) {
    if (rcfg.enabled && gate.step(prob[i], head_speed[i], s.t)) {
      const double g = steer_to_center_gain(s, pts, rcfg);
      s = apply_redirection(s, g);
      rep.events.push_back({i, s.t, g, head_speed[i]});
    }
    if (reset_due(s, pts, step)) {
      s = reset_2to1(s, pts, step);
      rep.reset_frames.push_back(i);
    }
    const Vec2 d = heading_dir(s.heading_phys);
    s.p_phys = {s.p_phys.x + step * d.x, s.p_phys.z + step * d.z};
    const double dist = step * static_cast<double>(i + 1);
    s.p_virt = {dist * vdir.x, dist * vdir.z};
    s.t = static_cast<double>(i + 1) / cfg.rate_hz;
    if ((i + 1) % cfg.path_stride == 0 || i + 1 == frames) {
      rep.phys_path.push_back(s.p_phys);
      rep.virt_path.push_back(s.p_virt);
    }
  }

  rep.frames = frames;
  rep.resets = s.resets;
  rep.virt_distance = step * static_cast<double>(frames);
  rep.wall_time = s.t;
  for (const auto& e : rep.events) rep.total_abs_gain += std::abs(e.gain);
  if (!rep.events.empty()) rep.mean_abs_gain = rep.total_abs_gain / static_cast<double>(rep.events.size());
  if (rep.wall_time > 0.0) rep.redirections_per_second = static_cast<double>(rep.events.size()) / rep.wall_time;
  return rep;
}

}  // namespace rdw::walk
