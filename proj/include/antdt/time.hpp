#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

namespace antdt {

// Simulated time as fixed-point microseconds. All event ordering and all
// serialized timestamps go through this type; floating seconds only appear
// at config parse and display boundaries.
struct SimTime {
  std::int64_t us = 0;

  static constexpr SimTime zero() { return SimTime{0}; }
  static SimTime from_seconds(double s) {
    return SimTime{static_cast<std::int64_t>(std::llround(s * 1e6))};
  }
  double seconds() const { return static_cast<double>(us) / 1e6; }

  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.us + b.us}; }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.us - b.us}; }
  constexpr SimTime& operator+=(SimTime o) { us += o.us; return *this; }
  friend constexpr auto operator<=>(SimTime a, SimTime b) = default;
};

constexpr SimTime operator*(SimTime t, std::int64_t k) { return SimTime{t.us * k}; }

}  // namespace antdt
