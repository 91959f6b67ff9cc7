#pragma once

#include <array>
#include <charconv>
#include <string>

namespace admrl {

/// Shortest round-trip decimal form of a double; stable across runs.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ec == std::errc{} ? end : buf.data());
}

}  // namespace admrl
