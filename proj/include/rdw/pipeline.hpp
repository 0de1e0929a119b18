#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdw/config.hpp"
#include "rdw/geometry.hpp"
#include "rdw/io.hpp"
#include "rdw/labeling.hpp"
#include "rdw/metrics.hpp"
#include "rdw/nn/model_io.hpp"
#include "rdw/nn/train.hpp"
#include "rdw/redirect.hpp"
#include "rdw/schema.hpp"
#include "rdw/synthgen.hpp"

namespace rdw::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using Progress = std::function<void(const std::string&)>;

// ---- config sections ---------------------------------------------------------

inline synth::TaskConfig task_config(const Config& c, std::uint64_t seed) {
  synth::TaskConfig t;
  t.duration = c.get_double("duration", t.duration);
  t.rate_hz = c.get_double("rate_hz", t.rate_hz);
  t.target_separation_min = c.get_double("target_separation_min", t.target_separation_min);
  t.target_separation_max = c.get_double("target_separation_max", t.target_separation_max);
  t.target_distance = c.get_double("target_distance", t.target_distance);
  t.targets_per_minute = c.get_double("targets_per_minute", t.targets_per_minute);
  t.seed = seed;
  synth::validate(t);
  return t;
}

inline synth::OculomotorParams oculomotor_params(const Config& c) {
  synth::OculomotorParams o;
  o.saccade_peak_speed_max = c.get_double("saccade_peak_speed_max", o.saccade_peak_speed_max);
  o.saccade_duration_min = c.get_double("saccade_duration_min", o.saccade_duration_min);
  o.saccade_duration_max = c.get_double("saccade_duration_max", o.saccade_duration_max);
  o.head_peak_speed_min = c.get_double("head_peak_speed_min", o.head_peak_speed_min);
  o.head_peak_speed_max = c.get_double("head_peak_speed_max", o.head_peak_speed_max);
  o.vor_gain = c.get_double("vor_gain", o.vor_gain);
  o.head_latency = c.get_double("head_latency", o.head_latency);
  o.head_rise_time = c.get_double("head_rise_time", o.head_rise_time);
  o.fixation_noise = c.get_double("fixation_noise", o.fixation_noise);
  o.head_pitch_fraction = c.get_double("head_pitch_fraction", o.head_pitch_fraction);
  o.fov_h = c.get_double("fov_h", o.fov_h);
  o.fov_v = c.get_double("fov_v", o.fov_v);
  synth::validate(o);
  return o;
}

inline nn::TrainConfig train_config(const Config& c, std::uint64_t seed) {
  nn::TrainConfig t;
  t.epochs = c.get_size("epochs", t.epochs);
  t.batch_size = c.get_size("batch_size", t.batch_size);
  t.learning_rate = c.get_double("learning_rate", t.learning_rate);
  t.split[0] = c.get_double("split_train", t.split[0]);
  t.split[1] = c.get_double("split_validation", t.split[1]);
  t.split[2] = c.get_double("split_test", t.split[2]);
  t.leaky_slope = c.get_double("leaky_slope", t.leaky_slope);
  t.adam_beta1 = c.get_double("adam_beta1", t.adam_beta1);
  t.adam_beta2 = c.get_double("adam_beta2", t.adam_beta2);
  t.adam_eps = c.get_double("adam_eps", t.adam_eps);
  t.pos_weight = c.get_double("pos_weight", t.pos_weight);
  t.session_split = c.get_bool("session_split", t.session_split);
  t.head_relu = c.get_bool("head_relu", t.head_relu);
  t.seed = seed;
  nn::validate(t);
  return t;
}

inline walk::Pts pts_config(const Config& c) {
  walk::Pts p;
  p.half_width = c.get_double("pts_half_width", p.half_width);
  p.half_depth = c.get_double("pts_half_depth", p.half_depth);
  p.reset_margin = c.get_double("reset_margin", p.reset_margin);
  walk::validate(p);
  return p;
}

inline walk::RedirectionConfig redirection_config(const Config& c) {
  walk::RedirectionConfig r;
  r.k_consecutive = c.get_size("k_consecutive", r.k_consecutive);
  r.max_gain_per_event = c.get_double("max_gain_per_event", r.max_gain_per_event);
  r.refractory = c.get_double("refractory", r.refractory);
  r.threshold = c.get_double("threshold", r.threshold);
  walk::validate(r);
  return r;
}

inline walk::SimConfig sim_config(const Config& c) {
  walk::SimConfig s;
  s.mission_distance = c.get_double("mission_distance", s.mission_distance);
  s.walk_speed = c.get_double("walk_speed", s.walk_speed);
  s.rate_hz = c.get_double("sim_rate_hz", s.rate_hz);
  s.head_targets_per_minute = c.get_double("head_targets_per_minute", s.head_targets_per_minute);
  s.path_stride = c.get_size("path_stride", s.path_stride);
  s.max_frames = c.get_size("max_frames", s.max_frames);
  walk::validate(s);
  return s;
}

/// Every key some stage reads; anything else in a config is most likely a typo.
inline std::set<std::string> known_keys() {
  Config probe;
  task_config(probe, 0);
  oculomotor_params(probe);
  train_config(probe, 0);
  pts_config(probe);
  redirection_config(probe);
  sim_config(probe);
  std::set<std::string> keys{"sessions", "precision", "split", "runs", "predictor", "heatmap_bins", "dwell_quantile"};
  std::istringstream lines(probe.effective());
  for (std::string line; std::getline(lines, line);) keys.insert(line.substr(0, line.find(" = ")));
  return keys;
}

// ---- helpers -------------------------------------------------------------------

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

inline void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) fail(ErrorKind::io, "missing input file " + p.string());
}

inline std::string session_name(std::size_t i) {
  std::string n = std::to_string(i);
  if (n.size() < 3) n.insert(0, 3 - n.size(), '0');
  return "session_" + n + ".jsonl";
}

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---- stages --------------------------------------------------------------------

/// Writes `sessions` synthetic traces (seeds seed, seed+1, ...) and a manifest.
inline json run_synth(const Config& c, std::uint64_t seed, const fs::path& out) {
  const std::size_t sessions = c.get_size("sessions", 30);
  require(sessions >= 1, "synth: sessions must be at least 1");
  const auto task = task_config(c, seed);
  const auto ocu = oculomotor_params(c);
  ensure_dir(out / "traces");
  json files = json::array();
  std::size_t frames = 0, positives = 0;
  for (std::size_t i = 0; i < sessions; ++i) {
    auto t = task;
    t.seed = seed + i;
    const Trace trace = synth::generate_session(t, ocu);
    io::save_trace(out / "traces" / session_name(i), trace);
    files.push_back("traces/" + session_name(i));
    frames += trace.size();
    positives += label_trace(trace).positives();
  }
  json m{{"schema_version", schema_version()}, {"seed", seed}, {"sessions", sessions},
         {"frames", frames}, {"positive_frames", positives}, {"files", files}};
  io::save_json(out / "synth.json", m);
  return m;
}

/// Trace files named by a synth manifest, or a single trace file.
inline std::vector<fs::path> trace_inputs(const fs::path& in) {
  if (fs::is_directory(in)) {
    const auto manifest = in / "synth.json";
    require_file(manifest);
    const auto m = io::load_json(manifest);
    check_schema_version(m.at("schema_version").get<std::string>(), manifest.string());
    std::vector<fs::path> out;
    for (const auto& f : m.at("files")) out.push_back(in / f.get<std::string>());
    return out;
  }
  require_file(in);
  return {in};
}

inline json run_featurize(const fs::path& in, const fs::path& out) {
  Dataset ds;
  const auto files = trace_inputs(in);
  for (std::size_t i = 0; i < files.size(); ++i) {
    require_file(files[i]);
    ds.append(labeled_windows(io::load_trace(files[i]), static_cast<std::uint32_t>(i)));
  }
  ensure_dir(out);
  io::save_windows(out / "windows.jsonl", ds);
  json s{{"schema_version", schema_version()}, {"sessions", files.size()}, {"windows", ds.size()},
         {"positives", ds.positives()}, {"negatives", ds.negatives()}};
  io::save_json(out / "featurize.json", s);
  return s;
}

inline json epoch_json(const nn::EpochRecord& e) {
  return {{"epoch", e.epoch},           {"train_loss", e.train_loss},
          {"val_loss", opt(e.val_loss)}, {"val_precision", opt(e.val_precision)},
          {"val_recall", opt(e.val_recall)}, {"val_accuracy", opt(e.val_accuracy)},
          {"val_auc", opt(e.val_auc)}};
}

inline fs::path windows_file(const fs::path& in) {
  const fs::path p = fs::is_directory(in) ? in / "windows.jsonl" : in;
  require_file(p);
  return p;
}

inline json run_train(const Config& c, std::uint64_t seed, const fs::path& in, const fs::path& out,
                      const Progress& progress = {}) {
  const auto cfg = train_config(c, seed);
  const auto precision = c.get_string("precision", "float");
  require(precision == "float" || precision == "double", "train: precision must be float or double");
  const Dataset ds = io::load_windows(windows_file(in));
  auto on_epoch = [&](const nn::EpochRecord& e) {
    if (progress) progress("epoch " + std::to_string(e.epoch) + " train_loss " + Config::format(e.train_loss) +
                           " val_auc " + (e.val_auc ? Config::format(*e.val_auc) : std::string("n/a")));
  };
  const auto result = precision == "float" ? nn::train<float>(ds, cfg, on_epoch) : nn::train<double>(ds, cfg, on_epoch);
  ensure_dir(out);
  nn::save_model(out / "model.bin", nn::Model{result.net, result.normalizer, cfg});
  json hist = json::array();
  for (const auto& e : result.history) hist.push_back(epoch_json(e));
  json s{{"schema_version", schema_version()},
         {"windows", ds.size()},
         {"positives", ds.positives()},
         {"split", {{"train", result.split.train.size()},
                    {"validation", result.split.validation.size()},
                    {"test", result.split.test.size()}}},
         {"precision", precision},
         {"parameter_count", nn::SaccadeNet<double>::parameter_count()},
         {"history", hist}};
  io::save_json(out / "train.json", s);
  return s;
}

/// Scores the model on one split of the windows it was trained on (or on all of them).
inline json run_eval(const Config& c, const fs::path& model_path, const fs::path& in, const fs::path& out) {
  require_file(model_path);
  const auto model = nn::load_model(model_path);
  const Dataset ds = io::load_windows(windows_file(in));
  const auto which = c.get_string("split", "test");
  std::vector<std::size_t> idx;
  if (which == "all") {
    idx.resize(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  } else {
    Rng rng(model.config.seed);
    auto split = nn::split_dataset(ds, model.config, rng);
    if (which == "test") idx = std::move(split.test);
    else if (which == "validation") idx = std::move(split.validation);
    else if (which == "train") idx = std::move(split.train);
    else fail(ErrorKind::invalid_argument, "eval: split must be train, validation, test or all");
  }
  require(!idx.empty(), "eval: selected split is empty");
  const auto prob = nn::predict_windows(model.net, model.normalizer, ds, idx);
  const auto labels = nn::gather_labels(ds, idx);
  const auto cm = metrics::confusion<std::uint8_t>(prob, labels);
  const auto roc = metrics::roc_auc<std::uint8_t>(prob, labels);

  ensure_dir(out);
  auto csv = io::open_out(out / "roc.csv");
  csv << "fpr,tpr,threshold\n";
  json points = json::array();
  for (const auto& p : roc.points) {
    csv << Config::format(p.fpr) << ',' << Config::format(p.tpr) << ','
        << (std::isinf(p.threshold) ? std::string("inf") : Config::format(p.threshold)) << '\n';
    points.push_back({p.fpr, p.tpr});
  }
  json s{{"schema_version", schema_version()},
         {"split", which},
         {"windows", idx.size()},
         {"precision", opt(cm.precision())},
         {"recall", opt(cm.recall())},
         {"accuracy", opt(cm.accuracy())},
         {"f1", opt(cm.f1())},
         {"auc", roc.auc},
         {"confusion", {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}}},
         {"roc_points", points}};
  io::save_json(out / "eval.json", s);
  return s;
}

inline json sim_run_json(const walk::SimReport& r, std::uint64_t seed, bool redirected) {
  json gains = json::array();
  json events = json::array();
  for (const auto& e : r.events) {
    gains.push_back(e.gain);
    events.push_back({{"frame", e.frame}, {"t", e.t}, {"gain", e.gain}, {"head_speed", e.head_speed}});
  }
  return {{"seed", seed},
          {"condition", redirected ? "redirected" : "baseline"},
          {"resets", r.resets},
          {"reset_frames", r.reset_frames},
          {"virt_distance", r.virt_distance},
          {"wall_time", r.wall_time},
          {"frames", r.frames},
          {"event_count", r.events.size()},
          {"total_abs_gain", r.total_abs_gain},
          {"mean_abs_gain", r.mean_abs_gain},
          {"redirections_per_second", r.redirections_per_second},
          {"gains", gains},
          {"events", events}};
}

inline void write_path(const fs::path& p, const std::vector<walk::Vec2>& path) {
  auto f = io::open_out(p);
  f << "x,z\n";
  for (const auto& v : path) f << Config::format(v.x) << ',' << Config::format(v.z) << '\n';
}

/// Paired redirected and reset-only runs for seeds seed .. seed+runs-1.
inline json run_simulate(const Config& c, std::uint64_t seed, const std::optional<fs::path>& model_path,
                         const fs::path& out) {
  const auto pts = pts_config(c);
  const auto rcfg = redirection_config(c);
  const auto scfg = sim_config(c);
  const std::size_t runs = c.get_size("runs", 1);
  require(runs >= 1, "simulate: runs must be at least 1");
  const auto kind = c.get_string("predictor", model_path ? "model" : "oracle");
  std::unique_ptr<walk::Predictor> predictor;
  if (kind == "model") {
    if (!model_path) fail(ErrorKind::invalid_argument, "simulate: predictor=model needs --model");
    require_file(*model_path);
    predictor = std::make_unique<walk::ModelPredictor>(nn::load_model(*model_path));
  } else if (kind == "oracle") {
    predictor = std::make_unique<walk::OraclePredictor>();
  } else {
    fail(ErrorKind::invalid_argument, "simulate: predictor must be model or oracle");
  }
  auto baseline_cfg = rcfg;
  baseline_cfg.enabled = false;

  ensure_dir(out);
  json list = json::array();
  for (std::size_t i = 0; i < runs; ++i) {
    const std::uint64_t s = seed + i;
    const auto red = walk::simulate(*predictor, pts, rcfg, scfg, s);
    const auto base = walk::simulate(*predictor, pts, baseline_cfg, scfg, s);
    if (i == 0) {
      write_path(out / "phys_path.csv", red.phys_path);
      write_path(out / "virt_path.csv", red.virt_path);
      write_path(out / "baseline_phys_path.csv", base.phys_path);
    }
    list.push_back(sim_run_json(red, s, true));
    list.push_back(sim_run_json(base, s, false));
  }
  json rep{{"schema_version", schema_version()},
           {"predictor", kind},
           {"mission_distance", scfg.mission_distance},
           {"walk_speed", scfg.walk_speed},
           {"pts", {{"half_width", pts.half_width}, {"half_depth", pts.half_depth}, {"reset_margin", pts.reset_margin}}},
           {"runs", list}};
  io::save_json(out / "sim_report.json", rep);
  return rep;
}

/// Heatmap, hot-region boxes and the smallest ellipse around the box corners.
inline json run_ellipse(const Config& c, const fs::path& in, const fs::path& out) {
  const auto bins = c.get_size("heatmap_bins", 64);
  const auto quantile = c.get_double("dwell_quantile", 0.95);
  require_file(in);
  const Trace trace = io::load_trace(in);
  require(trace.has_gaze(), "ellipse: trace has no gaze samples");
  std::vector<geom::Point> pts;
  pts.reserve(trace.gaze.size());
  for (const auto& g : trace.gaze) pts.push_back({g.viewport_x, g.viewport_y});
  const auto grid = geom::accumulate(pts, bins, bins);

  ensure_dir(out);
  auto csv = io::open_out(out / "heatmap.csv");
  for (std::size_t y = 0; y < grid.bins_y; ++y) {
    for (std::size_t x = 0; x < grid.bins_x; ++x) csv << (x ? "," : "") << grid.at(x, y);
    csv << '\n';
  }

  const auto thr = geom::dwell_threshold(grid, quantile);
  require(thr.has_value(), "ellipse: no gaze samples fall inside the viewport");
  const auto boxes = geom::bounding_boxes(grid, *thr);
  std::vector<geom::Point> corners;
  json jboxes = json::array();
  for (const auto& b : boxes) {
    for (const auto& p : b.corners()) corners.push_back(p);
    jboxes.push_back({{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}, {"cells", b.cells}});
  }
  const auto e = geom::min_enclosing_ellipse(corners);
  const auto ax = e.axes();
  json s{{"schema_version", schema_version()},
         {"cx", e.center.x}, {"cy", e.center.y}, {"a", ax.a}, {"b", ax.b}, {"angle_deg", ax.angle_deg},
         {"degenerate", e.degenerate},
         {"dwell_threshold", *thr},
         {"samples", grid.total()},
         {"rejected", grid.rejected},
         {"boxes", jboxes}};
  io::save_json(out / "ellipse.json", s);
  return s;
}

/// Collects every stage summary under run_dir into one report; adds a one-way ANOVA of
/// resets by condition when a simulation has at least two runs per condition.
inline json run_report(const fs::path& run_dir, const fs::path& out) {
  if (!fs::is_directory(run_dir)) fail(ErrorKind::io, "report: " + run_dir.string() + " is not a directory");
  static const std::vector<std::string> names{"synth.json", "featurize.json", "train.json",
                                              "eval.json", "sim_report.json", "ellipse.json"};
  std::vector<fs::path> found;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir))
    if (entry.is_regular_file() &&
        std::find(names.begin(), names.end(), entry.path().filename().string()) != names.end())
      found.push_back(entry.path());
  std::sort(found.begin(), found.end());

  json rep{{"schema_version", schema_version()}, {"stages", json::object()}};
  for (const auto& p : found) {
    json j = io::load_json(p);
    if (j.contains("schema_version")) check_schema_version(j["schema_version"].get<std::string>(), p.string());
    const auto key = fs::relative(p, run_dir).generic_string();
    const auto name = p.filename().string();
    if (name == "eval.json") j.erase("roc_points");
    if (name == "sim_report.json") {
      std::vector<double> red, base;
      json runs = json::array();
      for (const auto& r : j.at("runs")) {
        (r.at("condition") == "redirected" ? red : base).push_back(r.at("resets").get<double>());
        runs.push_back({{"seed", r.at("seed")}, {"condition", r.at("condition")}, {"resets", r.at("resets")},
                        {"event_count", r.at("event_count")}, {"mean_abs_gain", r.at("mean_abs_gain")},
                        {"total_abs_gain", r.at("total_abs_gain")},
                        {"redirections_per_second", r.at("redirections_per_second")}});
      }
      j["runs"] = runs;
      if (red.size() >= 2 && base.size() >= 2) {
        const auto a = metrics::anova_one_way({base, red});
        j["anova_resets"] = {{"f", opt(a.f)}, {"df_between", a.df_between}, {"df_within", a.df_within},
                             {"eta_p_sq", opt(a.eta_p_sq)}};
      }
    }
    rep["stages"][key] = j;
  }
  ensure_dir(out);
  io::save_json(out / "summary.json", rep);
  return rep;
}

}  // namespace rdw::pipeline
