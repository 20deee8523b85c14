#pragma once

#include <charconv>
#include <string>

namespace tutor {

/// Shortest decimal representation that round-trips the exact double.
/// Used for CSV and report output so reruns are byte-identical.
inline std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace tutor
