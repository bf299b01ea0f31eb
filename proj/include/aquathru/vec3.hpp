#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace aquathru {

// Per-channel triple in R,G,B order.
struct Vec3 {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double& operator[](std::size_t c) { return c == 0 ? r : (c == 1 ? g : b); }
  double operator[](std::size_t c) const { return c == 0 ? r : (c == 1 ? g : b); }

  bool all_finite() const {
    return std::isfinite(r) && std::isfinite(g) && std::isfinite(b);
  }
  bool all_in(double lo, double hi) const {
    return r >= lo && r <= hi && g >= lo && g <= hi && b >= lo && b <= hi;
  }
  bool all_ge(double lo) const { return r >= lo && g >= lo && b >= lo; }
};

inline constexpr std::array<const char*, 3> kChannelNames = {"r", "g", "b"};

}  // namespace aquathru
