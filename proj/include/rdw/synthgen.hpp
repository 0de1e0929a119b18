#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "rdw/error.hpp"
#include "rdw/kinematics.hpp"
#include "rdw/labeling.hpp"
#include "rdw/random.hpp"

namespace rdw::synth {

/// Target-acquisition task being mimicked.
struct TaskConfig {
  double duration = 60.0;  // seconds
  double rate_hz = 120.0;
  double target_separation_min = 20.0;  // degrees
  double target_separation_max = 90.0;
  double target_distance = 10.0;  // meters
  double targets_per_minute = 30.0;
  std::uint64_t seed = 0;
};

struct OculomotorParams {
  double saccade_peak_speed_max = 900.0;  // deg/s
  double saccade_duration_min = 0.020;    // s
  double saccade_duration_max = 0.200;
  double head_peak_speed_min = 170.0;  // deg/s
  double head_peak_speed_max = 350.0;
  double vor_gain = 1.0;
  double head_latency = 0.050;    // head onset after saccade onset, s
  double head_rise_time = 0.060;  // time from head onset to peak speed, s
  double fixation_noise = 0.1;    // +/- degrees of uniform eye-yaw jitter
  double head_pitch_fraction = 0.7;
  double fov_h = 110.0;  // viewport field of view, degrees
  double fov_v = 110.0;
};

inline void validate(const TaskConfig& t) {
  require(t.rate_hz > 0.0, "rate_hz must be positive");
  require(t.duration >= 0.0, "duration must be nonnegative");
  require(t.targets_per_minute >= 0.0, "targets_per_minute must be nonnegative");
  require(t.target_separation_min > 0.0 && t.target_separation_max >= t.target_separation_min,
          "target separation range is invalid");
  require(t.target_distance > 0.0, "target_distance must be positive");
}

inline void validate(const OculomotorParams& o) {
  require(o.saccade_peak_speed_max > 0.0, "saccade_peak_speed_max must be positive");
  require(o.saccade_duration_min > 0.0 && o.saccade_duration_max >= o.saccade_duration_min,
          "saccade duration range is invalid");
  require(o.head_peak_speed_min > 0.0 && o.head_peak_speed_max >= o.head_peak_speed_min,
          "head peak speed range is invalid");
  require(o.head_latency >= 0.0 && o.head_rise_time > 0.0, "head timing must be positive");
  require(o.fixation_noise >= 0.0, "fixation_noise must be nonnegative");
  require(o.fov_h > 0.0 && o.fov_v > 0.0, "field of view must be positive");
}

/// One planned gaze shift: an eye saccade plus the head turn that follows it.
struct GazeShift {
  double onset = 0.0;  // saccade onset, s
  double from_yaw = 0.0;
  double to_yaw = 0.0;
  double from_pitch = 0.0;
  double to_pitch = 0.0;
  double saccade_duration = 0.0;
  double head_peak = 0.0;
  double head_latency = 0.05;
  double head_rise = 0.0;
  double head_fall = 0.0;

  double amplitude() const { return std::abs(to_yaw - from_yaw); }
  double direction() const { return to_yaw >= from_yaw ? 1.0 : -1.0; }
  double saccade_peak() const { return 2.0 * amplitude() / saccade_duration; }
  double head_onset() const { return onset + head_latency; }
  double head_end() const { return head_onset() + head_rise + head_fall; }
};

/// Largest shift a squared-sine saccade can cover inside the envelope.
inline double max_saccade_amplitude(const OculomotorParams& o) {
  return 0.5 * o.saccade_peak_speed_max * o.saccade_duration_max;
}

/// Main-sequence duration, stretched if needed so the peak stays inside the envelope.
inline double saccade_duration(double amplitude, const OculomotorParams& o) {
  double d = 0.021 + 0.0022 * amplitude;
  d = std::max(d, 2.0 * amplitude / o.saccade_peak_speed_max);
  return std::clamp(d, o.saccade_duration_min, o.saccade_duration_max);
}

/// Builds a shift; the head profile rises over min(head_rise_time, A/peak).
inline GazeShift make_shift(double onset, double from_yaw, double to_yaw, double head_peak,
                            const OculomotorParams& o, double from_pitch = 0.0,
                            double to_pitch = 0.0) {
  GazeShift s;
  s.onset = onset;
  s.from_yaw = from_yaw;
  s.to_yaw = to_yaw;
  s.from_pitch = from_pitch;
  s.to_pitch = to_pitch;
  const double a = s.amplitude();
  require(a > 0.0, "gaze shift amplitude must be positive");
  require(a <= max_saccade_amplitude(o) + 1e-9,
          "gaze shift amplitude exceeds the saccade envelope");
  s.saccade_duration = saccade_duration(a, o);
  s.head_peak = head_peak;
  s.head_latency = o.head_latency;
  s.head_rise = std::min(o.head_rise_time, a / head_peak);
  s.head_fall = 2.0 * a / head_peak - s.head_rise;
  return s;
}

namespace detail {

// Fraction of a squared-sine saccade completed after tau seconds.
inline double saccade_progress(double tau, double duration) {
  if (tau <= 0.0) return 0.0;
  if (tau >= duration) return 1.0;
  const double x = tau / duration;
  return x - std::sin(2.0 * std::numbers::pi * x) / (2.0 * std::numbers::pi);
}

// Head displacement (degrees) tau seconds after head onset.
inline double head_displacement(const GazeShift& s, double tau) {
  if (tau <= 0.0) return 0.0;
  const double pi = std::numbers::pi;
  const double v = s.head_peak, tr = s.head_rise, tf = s.head_fall;
  if (tau < tr) return v * (tau / 2.0 - tr / (2.0 * pi) * std::sin(pi * tau / tr));
  const double u = tau - tr;
  if (u < tf) return v * tr / 2.0 + v * (u / 2.0 + tf / (2.0 * pi) * std::sin(pi * u / tf));
  return s.amplitude();
}

}  // namespace detail

/// Draws the shift schedule for a session.
inline std::vector<GazeShift> plan_shifts(const TaskConfig& task, const OculomotorParams& ocu,
                                          Rng& rng) {
  std::vector<GazeShift> shifts;
  if (task.targets_per_minute <= 0.0 || task.duration <= 0.0) return shifts;
  const double interval = 60.0 / task.targets_per_minute;
  const double sep_max = std::min(task.target_separation_max, max_saccade_amplitude(ocu));
  const double sep_min = std::min(task.target_separation_min, sep_max);

  double yaw = 0.0, pitch = 0.0;
  double t = 0.5 + interval * rng.uniform();
  while (t < task.duration) {
    const double amp = rng.uniform(sep_min, sep_max);
    const double dir = rng.coin() ? 1.0 : -1.0;
    const double height = rng.uniform(-1.0, 3.0);
    const double new_pitch = std::atan2(height, task.target_distance) * 180.0 / std::numbers::pi;
    const double frac = sep_max > sep_min ? (amp - sep_min) / (sep_max - sep_min) : 0.5;
    const double jitter = rng.uniform(0.9, 1.1);
    const double peak = std::clamp(
        ocu.head_peak_speed_min + (ocu.head_peak_speed_max - ocu.head_peak_speed_min) * frac * jitter,
        ocu.head_peak_speed_min, ocu.head_peak_speed_max);

    auto s = make_shift(t, yaw, yaw + dir * amp, peak, ocu, pitch, new_pitch);
    shifts.push_back(s);
    yaw = s.to_yaw;
    pitch = new_pitch;

    const double next = t + interval * rng.uniform(0.5, 1.5);
    t = std::max(next, s.head_end() + 0.15);
  }
  return shifts;
}

/// Samples head and gaze at rate_hz for a fixed shift schedule.
///
/// The eye leads with a saccade, then holds the target (VOR) while the head
/// completes its turn. Fixational noise is added outside saccades.
inline Trace render_session(const std::vector<GazeShift>& shifts, double duration,
                            double rate_hz, const OculomotorParams& ocu, Rng& rng) {
  require(rate_hz > 0.0, "rate_hz must be positive");
  Trace trace;
  trace.rate_hz = rate_hz;
  const auto n = static_cast<std::size_t>(std::floor(duration * rate_hz + 1e-9));
  trace.head.resize(n);
  trace.gaze.resize(n);

  std::size_t k = 0;  // index of the first shift not yet started
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    while (k < shifts.size() && shifts[k].onset <= t) ++k;

    double head_yaw = 0.0, head_pitch = 0.0, gaze_yaw = 0.0, gaze_pitch = 0.0;
    bool in_saccade = false;
    if (k == 0) {
      if (!shifts.empty()) {
        gaze_yaw = head_yaw = shifts.front().from_yaw;
        gaze_pitch = shifts.front().from_pitch;
        head_pitch = ocu.head_pitch_fraction * gaze_pitch;
      }
    } else {
      const GazeShift& s = shifts[k - 1];
      const double tau = t - s.onset;
      const double dir = s.direction();
      const double hd = detail::head_displacement(s, t - s.head_onset());
      const double head_frac = hd / s.amplitude();
      head_yaw = s.from_yaw + dir * hd;
      head_pitch = ocu.head_pitch_fraction *
                   (s.from_pitch + (s.to_pitch - s.from_pitch) * head_frac);
      if (tau < s.saccade_duration) {
        in_saccade = tau > 0.0;
        const double p = detail::saccade_progress(tau, s.saccade_duration);
        gaze_yaw = s.from_yaw + dir * s.amplitude() * p;
        gaze_pitch = s.from_pitch + (s.to_pitch - s.from_pitch) * p;
      } else {
        // Eye-in-world holds the target; with vor_gain < 1 it is dragged by the head.
        gaze_yaw = s.to_yaw + (1.0 - ocu.vor_gain) * (head_yaw - s.to_yaw);
        gaze_pitch = s.to_pitch;
      }
    }
    const double noise = rng.uniform(-ocu.fixation_noise, ocu.fixation_noise);
    if (!in_saccade) gaze_yaw += noise;

    auto& h = trace.head[i];
    h.t = t;
    h.yaw = wrap_deg(head_yaw);
    h.pitch = head_pitch;
    h.roll = 0.0;

    auto& g = trace.gaze[i];
    g.t = t;
    g.eye_yaw_world = wrap_deg(gaze_yaw);
    g.eye_pitch_world = gaze_pitch;
    g.viewport_x = std::clamp(0.5 - (gaze_yaw - head_yaw) / ocu.fov_h, 0.0, 1.0);
    g.viewport_y = std::clamp(0.5 + (gaze_pitch - head_pitch) / ocu.fov_v, 0.0, 1.0);
  }
  return trace;
}

/// Deterministic session: identical (task, ocu) give bit-identical traces.
inline Trace generate_session(const TaskConfig& task, const OculomotorParams& ocu) {
  validate(task);
  validate(ocu);
  Rng rng(task.seed);
  const auto shifts = plan_shifts(task, ocu, rng);
  return render_session(shifts, task.duration, task.rate_hz, ocu, rng);
}

struct Corpus {
  Dataset dataset;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Labeled windows from n_sessions sessions seeded seed, seed+1, ...
inline Corpus generate_corpus(std::size_t n_sessions, const TaskConfig& task,
                              const OculomotorParams& ocu) {
  require(n_sessions >= 1, "generate_corpus: need at least one session");
  Corpus c;
  for (std::size_t i = 0; i < n_sessions; ++i) {
    TaskConfig t = task;
    t.seed = task.seed + i;
    c.dataset.append(labeled_windows(generate_session(t, ocu), static_cast<std::uint32_t>(i)));
  }
  c.positives = c.dataset.positives();
  c.negatives = c.dataset.negatives();
  return c;
}

}  // namespace rdw::synth
