#pragma once

#include <cstdio>
#include <string>

namespace subcusum {

/// Shortest representation preserving the double exactly on round-trip
/// (17 significant digits).
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace subcusum
