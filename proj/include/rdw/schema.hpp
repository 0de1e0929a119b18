#pragma once

#include <charconv>
#include <string>

#include "rdw/error.hpp"

namespace rdw {

inline constexpr int kSchemaMajor = 1;
inline constexpr int kSchemaMinor = 0;

inline std::string schema_version() {
  return std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor);
}

/// Accepts "M.m" with a known major; any minor of that major is readable.
inline void check_schema_version(const std::string& v, const std::string& what) {
  int major = -1;
  const auto dot = v.find('.');
  const auto end = v.data() + (dot == std::string::npos ? v.size() : dot);
  const auto [ptr, ec] = std::from_chars(v.data(), end, major);
  if (ec != std::errc{} || ptr != end)
    fail(ErrorKind::schema, what + ": malformed schema_version '" + v + "'");
  if (major != kSchemaMajor)
    fail(ErrorKind::schema, what + ": unsupported schema major version " + std::to_string(major));
}

}  // namespace rdw
