#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace ktn {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Point on T^N stored as angles; the second entry is ignored when N = 1.
using TorusPoint = std::array<double, 2>;

/// Normalize an angle to [0, 2pi).
inline double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

inline TorusPoint wrap(const TorusPoint& x) { return {wrap_angle(x[0]), wrap_angle(x[1])}; }

}  // namespace ktn
