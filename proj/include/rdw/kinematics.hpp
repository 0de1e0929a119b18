#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdw/error.hpp"

namespace rdw {

struct HeadSample {
  double t = 0.0;
  double yaw = 0.0;  // degrees, [-180, 180)
  double pitch = 0.0;
  double roll = 0.0;
};

struct GazeSample {
  double t = 0.0;
  double eye_yaw_world = 0.0;
  double eye_pitch_world = 0.0;
  double viewport_x = 0.5;  // [0, 1]
  double viewport_y = 0.5;
};

/// Uniformly sampled head (and optionally gaze) pose series.
struct Trace {
  double rate_hz = 120.0;
  std::vector<HeadSample> head;
  std::vector<GazeSample> gaze;  // empty, or index-aligned with head

  std::size_t size() const { return head.size(); }
  bool has_gaze() const { return !gaze.empty(); }
  double dt() const { return 1.0 / rate_hz; }
};

/// Wraps an angle into [-180, 180).
inline double wrap_deg(double a) {
  double w = std::fmod(a + 180.0, 360.0);
  if (w < 0.0) w += 360.0;
  return w - 180.0;
}

/// Checks sampling, alignment and range invariants; throws on violation.
inline void validate(const Trace& trace) {
  require(trace.rate_hz > 0.0 && std::isfinite(trace.rate_hz),
          "trace rate_hz must be positive");
  const double dt = trace.dt();
  for (std::size_t i = 0; i < trace.head.size(); ++i) {
    const auto& h = trace.head[i];
    if (!(h.yaw >= -180.0 && h.yaw < 180.0))
      fail(ErrorKind::schema, "head yaw outside [-180, 180) at sample " + std::to_string(i));
    if (i > 0 && std::abs(h.t - trace.head[i - 1].t - dt) >= 1e-6)
      fail(ErrorKind::schema, "non-uniform sampling at sample " + std::to_string(i));
  }
  if (trace.has_gaze()) {
    if (trace.gaze.size() != trace.head.size())
      fail(ErrorKind::schema, "gaze and head series differ in length");
    for (std::size_t i = 0; i < trace.gaze.size(); ++i) {
      const auto& g = trace.gaze[i];
      if (std::abs(g.t - trace.head[i].t) >= 1e-9)
        fail(ErrorKind::schema, "gaze not index-aligned at sample " + std::to_string(i));
      if (g.viewport_x < 0.0 || g.viewport_x > 1.0 || g.viewport_y < 0.0 || g.viewport_y > 1.0)
        fail(ErrorKind::schema, "viewport coordinate outside [0,1] at sample " + std::to_string(i));
    }
  }
}

/// Removes 360-degree jumps so consecutive differences stay within 180 degrees.
inline std::vector<double> unwrap_yaw(std::span<const double> yaws) {
  std::vector<double> out(yaws.begin(), yaws.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double step = wrap_deg(out[i] - out[i - 1]);
    out[i] = out[i - 1] + step;
  }
  return out;
}

inline double angular_velocity(double a_prev, double a_curr, double dt) {
  require(dt > 0.0, "angular_velocity: dt must be positive");
  return (a_curr - a_prev) / dt;
}

inline constexpr std::size_t kFeatureCount = 10;
inline constexpr std::size_t kWindowSize = 9;

/// The ten yaw-axis head features at one frame.
struct FeatureVector {
  double h_tm2 = 0, h_tm1 = 0, h_t = 0;  // unwrapped yaw, degrees
  double d_dir = 0;                      // h_t - h_tm1
  double v2 = 0, v1 = 0, dv = 0;         // deg/s
  double a2 = 0, a1 = 0, da = 0;         // deg/s^2
  std::size_t frame = 0;                 // index of f_t in the source trace

  std::array<double, kFeatureCount> values() const {
    return {h_tm2, h_tm1, h_t, d_dir, v2, v1, dv, a2, a1, da};
  }

  static FeatureVector from_values(std::span<const double> v, std::size_t frame = 0) {
    require(v.size() == kFeatureCount, "feature vector needs 10 values");
    FeatureVector f;
    f.h_tm2 = v[0]; f.h_tm1 = v[1]; f.h_t = v[2]; f.d_dir = v[3];
    f.v2 = v[4]; f.v1 = v[5]; f.dv = v[6];
    f.a2 = v[7]; f.a1 = v[8]; f.da = v[9];
    f.frame = frame;
    return f;
  }
};

inline std::vector<double> head_yaws(const Trace& trace) {
  std::vector<double> y(trace.head.size());
  std::transform(trace.head.begin(), trace.head.end(), y.begin(),
                 [](const HeadSample& s) { return s.yaw; });
  return y;
}

/// One feature vector per frame t >= 2, computed with backward differences.
///
/// A2 is the acceleration of the previous frame's velocity step and needs
/// frame t-3; at t = 2 it is 0.
inline std::vector<FeatureVector> featurize(const Trace& trace) {
  if (trace.head.size() < 3) return {};
  require(trace.rate_hz > 0.0, "featurize: rate_hz must be positive");
  const double rate = trace.rate_hz;
  const auto yaw = unwrap_yaw(head_yaws(trace));

  std::vector<FeatureVector> out;
  out.reserve(yaw.size() - 2);
  for (std::size_t t = 2; t < yaw.size(); ++t) {
    FeatureVector f;
    f.frame = t;
    f.h_tm2 = yaw[t - 2];
    f.h_tm1 = yaw[t - 1];
    f.h_t = yaw[t];
    f.d_dir = f.h_t - f.h_tm1;
    f.v2 = (f.h_tm1 - f.h_tm2) * rate;
    f.v1 = f.d_dir * rate;
    f.dv = f.v1 - f.v2;
    f.a1 = (f.v1 - f.v2) * rate;
    f.a2 = out.empty() ? 0.0 : out.back().a1;
    f.da = f.a1 - f.a2;
    out.push_back(f);
  }
  return out;
}

struct FeatureWindow {
  std::vector<FeatureVector> rows;  // oldest first
  std::optional<int> label;

  std::size_t end_frame() const { return rows.empty() ? 0 : rows.back().frame; }
};

/// Stride-1 sliding windows over consecutive frames.
inline std::vector<FeatureWindow> windows(std::span<const FeatureVector> features,
                                          std::size_t size = kWindowSize) {
  require(size >= 1, "windows: size must be at least 1");
  std::vector<FeatureWindow> out;
  if (features.size() < size) return out;
  for (std::size_t i = 1; i < features.size(); ++i) {
    if (features[i].frame != features[i - 1].frame + 1)
      fail(ErrorKind::invalid_argument, "windows: features are not from consecutive frames");
  }
  out.reserve(features.size() - size + 1);
  for (std::size_t i = 0; i + size <= features.size(); ++i) {
    FeatureWindow w;
    w.rows.assign(features.begin() + static_cast<std::ptrdiff_t>(i),
                  features.begin() + static_cast<std::ptrdiff_t>(i + size));
    out.push_back(std::move(w));
  }
  return out;
}

/// Per-feature z-score transform fitted on the training split.
struct Normalizer {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};

  static constexpr double kStdFloor = 1e-8;

  template <class RowRange>
  static Normalizer fit_rows(const RowRange& rows) {
    Normalizer n;
    std::size_t count = 0;
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < kFeatureCount; ++j) n.mean[j] += r[j];
      ++count;
    }
    require(count > 0, "fit_normalizer: empty training set");
    for (auto& m : n.mean) m /= static_cast<double>(count);
    std::array<double, kFeatureCount> ss{};
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < kFeatureCount; ++j) {
        const double d = r[j] - n.mean[j];
        ss[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < kFeatureCount; ++j)
      n.stddev[j] = std::max(std::sqrt(ss[j] / static_cast<double>(count)), kStdFloor);
    return n;
  }

  double apply(std::size_t j, double x) const { return (x - mean[j]) / stddev[j]; }
  double invert(std::size_t j, double z) const { return z * stddev[j] + mean[j]; }

  FeatureVector apply(const FeatureVector& f) const {
    auto v = f.values();
    for (std::size_t j = 0; j < kFeatureCount; ++j) v[j] = apply(j, v[j]);
    return FeatureVector::from_values(v, f.frame);
  }

  FeatureVector invert(const FeatureVector& f) const {
    auto v = f.values();
    for (std::size_t j = 0; j < kFeatureCount; ++j) v[j] = invert(j, v[j]);
    return FeatureVector::from_values(v, f.frame);
  }
};

inline Normalizer fit_normalizer(std::span<const FeatureVector> train_features) {
  std::vector<std::array<double, kFeatureCount>> rows;
  rows.reserve(train_features.size());
  for (const auto& f : train_features) rows.push_back(f.values());
  return Normalizer::fit_rows(rows);
}

inline std::vector<FeatureVector> apply_normalizer(const Normalizer& n,
                                                   std::span<const FeatureVector> features) {
  std::vector<FeatureVector> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(n.apply(f));
  return out;
}

}  // namespace rdw
