#pragma once

#include <cstdio>
#include <string>

namespace senssched {

/// Reals in CSV outputs: 12 significant digits.
inline std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

}  // namespace senssched
