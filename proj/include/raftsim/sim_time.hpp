#pragma once

#include <compare>
#include <cmath>
#include <cstdint>

namespace raftsim {

/// Simulated time in integer microseconds since simulation start.
struct SimTime {
  std::int64_t us = 0;

  static constexpr SimTime from_us(std::int64_t v) { return SimTime{v}; }
  static constexpr SimTime from_ms(std::int64_t v) { return SimTime{v * 1000}; }
  static constexpr SimTime from_sec(std::int64_t v) { return SimTime{v * 1000000}; }
  // Rounds to the nearest microsecond.
  static SimTime from_ms_f(double ms) { return SimTime{static_cast<std::int64_t>(std::llround(ms * 1000.0))}; }

  constexpr double ms() const { return static_cast<double>(us) / 1000.0; }
  constexpr double sec() const { return static_cast<double>(us) / 1e6; }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime& operator+=(SimTime o) { us += o.us; return *this; }
  constexpr SimTime& operator-=(SimTime o) { us -= o.us; return *this; }
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.us + b.us}; }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.us - b.us}; }
  friend constexpr SimTime operator*(SimTime a, std::int64_t k) { return SimTime{a.us * k}; }
  friend constexpr SimTime operator*(std::int64_t k, SimTime a) { return SimTime{a.us * k}; }
};

inline constexpr SimTime kZeroTime{0};

} // namespace raftsim
