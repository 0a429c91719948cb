#pragma once

#include <charconv>
#include <string>

namespace skycatch::csv {

// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace skycatch::csv
