#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdw/error.hpp"
#include "rdw/kinematics.hpp"
#include "rdw/labeling.hpp"
#include "rdw/schema.hpp"

namespace rdw::io {

using nlohmann::json;

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) fail(ErrorKind::io, "cannot open " + p.string());
  return f;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot write " + p.string());
  return f;
}

inline json parse_line(const std::string& line, const std::string& what, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": " + e.what());
  }
}

/// Header lines may omit schema_version; when present its major must be known.
inline void check_header(const json& h, const std::string& what) {
  if (!h.is_object()) fail(ErrorKind::schema, what + ": header is not an object");
  if (h.contains("schema_version")) check_schema_version(h["schema_version"].get<std::string>(), what);
}

// ---- traces ------------------------------------------------------------------

inline void write_trace(std::ostream& os, const Trace& trace) {
  os << json{{"rate_hz", trace.rate_hz}, {"schema_version", schema_version()}}.dump() << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& h = trace.head[i];
    json j{{"t", h.t}, {"head_yaw", h.yaw}, {"head_pitch", h.pitch}, {"head_roll", h.roll},
           {"eye_yaw", nullptr}, {"eye_pitch", nullptr}, {"vx", nullptr}, {"vy", nullptr}};
    if (trace.has_gaze()) {
      const auto& g = trace.gaze[i];
      j["eye_yaw"] = g.eye_yaw_world;
      j["eye_pitch"] = g.eye_pitch_world;
      j["vx"] = g.viewport_x;
      j["vy"] = g.viewport_y;
    }
    os << j.dump() << '\n';
  }
}

/// Parses a trace; gaze fields must be all null or all present on every line.
inline Trace read_trace(std::istream& is, const std::string& what = "trace") {
  Trace trace;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  int gaze_mode = -1;
  try {
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = parse_line(line, what, lineno);
      if (!header) {
        check_header(j, what);
        if (!j.contains("rate_hz")) fail(ErrorKind::schema, what + ": header lacks rate_hz");
        trace.rate_hz = j.at("rate_hz").get<double>();
        header = true;
        continue;
      }
      HeadSample h{j.at("t").get<double>(), j.at("head_yaw").get<double>(),
                   j.at("head_pitch").get<double>(), j.at("head_roll").get<double>()};
      trace.head.push_back(h);
      const bool has = !j.at("eye_yaw").is_null();
      if (gaze_mode == -1) gaze_mode = has;
      if (has != static_cast<bool>(gaze_mode))
        fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": gaze present on some samples only");
      if (has) {
        GazeSample g;
        g.t = h.t;
        g.eye_yaw_world = j.at("eye_yaw").get<double>();
        g.eye_pitch_world = j.at("eye_pitch").get<double>();
        g.viewport_x = j.at("vx").get<double>();
        g.viewport_y = j.at("vy").get<double>();
        trace.gaze.push_back(g);
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!header) fail(ErrorKind::schema, what + ": missing header line");
  validate(trace);
  return trace;
}

inline void save_trace(const std::filesystem::path& p, const Trace& trace) {
  auto f = open_out(p);
  write_trace(f, trace);
}

inline Trace load_trace(const std::filesystem::path& p) {
  auto f = open_in(p);
  return read_trace(f, p.string());
}

// ---- labeled windows ---------------------------------------------------------

inline void write_windows(std::ostream& os, const Dataset& ds) {
  os << json{{"schema_version", schema_version()}, {"window_size", kWindowSize},
             {"feature_count", kFeatureCount}}.dump() << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto w = ds.window(i);
    json rows = json::array();
    for (std::size_t r = 0; r < kWindowSize; ++r)
      rows.push_back(std::vector<double>(w.begin() + static_cast<std::ptrdiff_t>(r * kFeatureCount),
                                         w.begin() + static_cast<std::ptrdiff_t>((r + 1) * kFeatureCount)));
    os << json{{"window", rows}, {"label", ds.labels[i]}, {"session", ds.sessions[i]}}.dump() << '\n';
  }
}

/// Reads labeled windows; a leading header line (no "window" key) is optional.
inline Dataset read_windows(std::istream& is, const std::string& what = "windows") {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> flat(Dataset::kStride);
  try {
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = parse_line(line, what, lineno);
      if (!j.contains("window")) {
        if (lineno != 1) fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": missing window");
        check_header(j, what);
        continue;
      }
      const auto& rows = j.at("window");
      if (!rows.is_array() || rows.size() != kWindowSize)
        fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": window must have 9 rows");
      for (std::size_t r = 0; r < kWindowSize; ++r) {
        if (!rows[r].is_array() || rows[r].size() != kFeatureCount)
          fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": rows must hold 10 features");
        for (std::size_t c = 0; c < kFeatureCount; ++c) flat[r * kFeatureCount + c] = rows[r][c].get<double>();
      }
      const int label = j.at("label").get<int>();
      if (label != 0 && label != 1)
        fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": label must be 0 or 1");
      const auto session = j.contains("session") ? j["session"].get<std::uint32_t>() : 0u;
      ds.push(flat, static_cast<std::uint8_t>(label), session);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, what + " line " + std::to_string(lineno) + ": " + e.what());
  }
  return ds;
}

inline void save_windows(const std::filesystem::path& p, const Dataset& ds) {
  auto f = open_out(p);
  write_windows(f, ds);
}

inline Dataset load_windows(const std::filesystem::path& p) {
  auto f = open_in(p);
  return read_windows(f, p.string());
}

inline void save_json(const std::filesystem::path& p, const json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

inline json load_json(const std::filesystem::path& p) {
  auto f = open_in(p);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, p.string() + ": " + e.what());
  }
}

}  // namespace rdw::io
