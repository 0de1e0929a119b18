#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rdw/error.hpp"

namespace rdw {

/// Flat `key = value` settings with typed lookup. Every lookup records the value in
/// effect (explicit or default), so the effective configuration can be written out.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& origin = "config") {
    Config c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string_view::npos)
        fail(ErrorKind::invalid_argument, origin + ":" + std::to_string(lineno) + ": expected key = value");
      const auto key = trim(text.substr(0, eq));
      if (key.empty()) fail(ErrorKind::invalid_argument, origin + ":" + std::to_string(lineno) + ": empty key");
      c.set(std::string(key), std::string(trim(text.substr(eq + 1))));
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::io, "cannot open config file " + path.string());
    return parse(f, path.string());
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  /// Applies `key=value` overrides on top of the file values.
  void apply_override(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos || eq == 0)
      fail(ErrorKind::invalid_argument, "override '" + std::string(kv) + "' is not key=value");
    set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    effective_[key] = v;
    return v;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    double v = fallback;
    if (it != values_.end()) v = parse_number<double>(key, it->second);
    effective_[key] = format(v);
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    std::uint64_t v = fallback;
    if (it != values_.end()) v = parse_number<std::uint64_t>(key, it->second);
    effective_[key] = std::to_string(v);
    return v;
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    bool v = fallback;
    if (it != values_.end()) {
      const auto& s = it->second;
      if (s == "true" || s == "1" || s == "yes") v = true;
      else if (s == "false" || s == "0" || s == "no") v = false;
      else fail(ErrorKind::invalid_argument, "config key '" + key + "' expects a boolean, got '" + s + "'");
    }
    effective_[key] = v ? "true" : "false";
    return v;
  }

  /// Keys that were set but never looked up.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!effective_.count(k)) out.push_back(k);
    return out;
  }

  /// Sorted `key = value` lines of every looked-up setting.
  std::string effective() const {
    std::ostringstream os;
    for (const auto& [k, v] : effective_) os << k << " = " << v << '\n';
    return os.str();
  }

  static std::string format(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> effective_;

  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  template <class T>
  static T parse_number(const std::string& key, const std::string& s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      fail(ErrorKind::invalid_argument, "config key '" + key + "' has invalid value '" + s + "'");
    return v;
  }
};

}  // namespace rdw
