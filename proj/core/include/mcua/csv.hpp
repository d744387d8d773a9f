#pragma once

#include <charconv>
#include <cstdint>
#include <string>

#include "mcua/errors.hpp"

namespace mcua {

// Shortest round-trip decimal form. Keeps CSV output byte-stable across runs
// and faithful to the double that produced it.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw NumericError("fmt_double: to_chars failed");
  return std::string(buf, res.ptr);
}

inline std::string fmt_int(int64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace mcua
