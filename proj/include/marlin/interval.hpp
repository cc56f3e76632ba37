#pragma once

#include <algorithm>
#include <charconv>
#include <string>

namespace marlin {

/// Truth annotation: a closed subinterval [lower, upper] of [0, 1].
///
/// Ordered by containment — [a,b] precedes [c,d] when a <= c and d <= b —
/// so the vaguest interval [0,1] is the bottom element and every point
/// interval [x,x] is maximal. A value with lower > upper is the inconsistent
/// state; it is representable so that conflicting evidence can be detected
/// rather than silently dropped.
struct Interval {
  double lower = 0.0;
  double upper = 1.0;

  static constexpr Interval bottom() { return {0.0, 1.0}; }
  static constexpr Interval point(double x) { return {x, x}; }

  constexpr bool consistent() const { return lower <= upper; }
  constexpr bool is_bottom() const { return lower == 0.0 && upper == 1.0; }
  constexpr bool in_unit() const {
    return 0.0 <= lower && lower <= 1.0 && 0.0 <= upper && upper <= 1.0;
  }

  bool operator==(const Interval&) const = default;
};

/// Partial order: a is below (vaguer than) b.
constexpr bool leq(Interval a, Interval b) {
  return a.lower <= b.lower && b.upper <= a.upper;
}

/// Evidence combination = interval intersection. The result may be
/// inconsistent; callers decide whether that is an error.
constexpr Interval combine(Interval a, Interval b) {
  return {std::max(a.lower, b.lower), std::min(a.upper, b.upper)};
}

/// Shortest decimal that round-trips the double ("0.8", "1", not "0.800000").
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

inline std::string to_string(Interval a) {
  return "[" + format_double(a.lower) + "," + format_double(a.upper) + "]";
}

}  // namespace marlin
