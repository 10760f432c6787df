#pragma once

#include <charconv>
#include <string>

namespace apidrift {

/// Shortest-to-read decimal with 17 significant digits; parses back to the
/// same double.
inline std::string format_real(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, end);
}

}  // namespace apidrift
