#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace uspas::detail {

/// Shortest decimal that round-trips; "inf", "-inf" and "nan" otherwise.
inline void append_number(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "nan";
    return;
  }
  if (std::isinf(v)) {
    out += v > 0 ? "inf" : "-inf";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline std::string format_number(double v) {
  std::string s;
  append_number(s, v);
  return s;
}

}  // namespace uspas::detail
