#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rdw/error.hpp"
#include "rdw/kinematics.hpp"

namespace rdw {

inline constexpr double kSaccadeSpeedThreshold = 180.0;  // deg/s, strict
inline constexpr double kHeadGateSpeed = 150.0;          // deg/s, inclusive

struct LabelSeries {
  std::vector<std::uint8_t> labels;
  std::vector<double> eye_speed;
  std::vector<double> head_speed;

  std::size_t positives() const {
    std::size_t n = 0;
    for (auto l : labels) n += l;
    return n;
  }
};

/// |backward difference| of an unwrapped angle series, in deg/s; frame 0 is 0.
inline std::vector<double> angular_speed_series(std::span<const double> angles, double rate_hz) {
  const auto a = unwrap_yaw(angles);
  std::vector<double> speed(a.size(), 0.0);
  for (std::size_t i = 1; i < a.size(); ++i) speed[i] = std::abs(a[i] - a[i - 1]) * rate_hz;
  return speed;
}

inline std::vector<double> head_speed_series(const Trace& trace) {
  return angular_speed_series(head_yaws(trace), trace.rate_hz);
}

inline std::vector<double> eye_speed_series(const Trace& trace) {
  if (!trace.has_gaze())
    fail(ErrorKind::invalid_argument, "trace has no gaze samples; labels cannot be produced");
  std::vector<double> yaw(trace.gaze.size());
  for (std::size_t i = 0; i < yaw.size(); ++i) yaw[i] = trace.gaze[i].eye_yaw_world;
  return angular_speed_series(yaw, trace.rate_hz);
}

/// Saccade frames with the head-rotation gate applied.
inline LabelSeries label_frames(std::span<const double> eye_speed, std::span<const double> head_speed,
                                double eye_threshold = kSaccadeSpeedThreshold,
                                double head_gate = kHeadGateSpeed) {
  require(eye_speed.size() == head_speed.size(), "label_frames: series length mismatch");
  LabelSeries out;
  out.eye_speed.assign(eye_speed.begin(), eye_speed.end());
  out.head_speed.assign(head_speed.begin(), head_speed.end());
  out.labels.resize(eye_speed.size());
  for (std::size_t i = 0; i < eye_speed.size(); ++i)
    out.labels[i] = (eye_speed[i] > eye_threshold && head_speed[i] >= head_gate) ? 1 : 0;
  return out;
}

inline LabelSeries label_trace(const Trace& trace) {
  return label_frames(eye_speed_series(trace), head_speed_series(trace));
}

/// Each window takes the label of the frame in its last row.
inline std::vector<FeatureWindow> window_labels(const LabelSeries& labels,
                                                std::vector<FeatureWindow> wins) {
  for (auto& w : wins) {
    if (w.rows.empty()) fail(ErrorKind::invalid_argument, "window_labels: empty window");
    const std::size_t f = w.end_frame();
    if (f >= labels.labels.size())
      fail(ErrorKind::invalid_argument,
           "window_labels: no label for frame " + std::to_string(f));
    w.label = labels.labels[f];
  }
  return wins;
}

/// Flat labeled-window store: window i occupies data[i*90, (i+1)*90) row-major (9 x 10).
struct Dataset {
  static constexpr std::size_t kStride = kWindowSize * kFeatureCount;

  std::vector<double> data;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint32_t> sessions;

  std::size_t size() const { return labels.size(); }

  std::span<const double> window(std::size_t i) const {
    return std::span<const double>(data).subspan(i * kStride, kStride);
  }

  std::size_t positives() const {
    std::size_t n = 0;
    for (auto l : labels) n += l;
    return n;
  }
  std::size_t negatives() const { return size() - positives(); }

  void push(std::span<const double> window, std::uint8_t label, std::uint32_t session) {
    require(window.size() == kStride, "dataset window must hold 9 x 10 values");
    data.insert(data.end(), window.begin(), window.end());
    labels.push_back(label);
    sessions.push_back(session);
  }

  void push(const FeatureWindow& w, std::uint32_t session) {
    require(w.rows.size() == kWindowSize, "dataset window must have 9 rows");
    require(w.label.has_value(), "dataset window must be labeled");
    for (const auto& r : w.rows) {
      const auto v = r.values();
      data.insert(data.end(), v.begin(), v.end());
    }
    labels.push_back(static_cast<std::uint8_t>(*w.label));
    sessions.push_back(session);
  }

  void append(const Dataset& other) {
    data.insert(data.end(), other.data.begin(), other.data.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    sessions.insert(sessions.end(), other.sessions.begin(), other.sessions.end());
  }
};

/// Featurize, window and label one trace that carries gaze.
inline Dataset labeled_windows(const Trace& trace, std::uint32_t session = 0) {
  Dataset ds;
  const auto feats = featurize(trace);
  auto wins = windows(feats);
  if (wins.empty()) return ds;
  wins = window_labels(label_trace(trace), std::move(wins));
  ds.data.reserve(wins.size() * Dataset::kStride);
  for (const auto& w : wins) ds.push(w, session);
  return ds;
}

}  // namespace rdw
