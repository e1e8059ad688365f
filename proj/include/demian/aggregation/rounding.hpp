#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace demian {

// Half-away-from-zero at `digits` decimals. The scaled value is first snapped
// to a 1e-9 grid so means that are exact halves in decimal (e.g. .095) but
// land a hair below in binary still round up.
inline double round_half_away(double x, int digits = 2) {
  const double scale = std::pow(10.0, digits);
  const double snapped = std::round(x * scale * 1e9) / 1e9;
  return std::round(snapped) / scale;
}

// Two-decimal success-rate display without the leading zero (".52").
inline std::string format_sr(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_away(x, 2));
  std::string s = buf;
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

}  // namespace demian
