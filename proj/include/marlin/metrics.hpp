#pragma once

#include <cmath>
#include <cstdlib>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "marlin/geo.hpp"
#include "marlin/trajectory.hpp"

namespace marlin {

/// Which part of the hidden suffix a prediction is judged against: the bins
/// within `width` steps of the horizon, or the whole suffix.
struct EvalWindow {
  enum class Mode { at_horizon, full_suffix };
  Mode mode = Mode::at_horizon;
  int width = 1;
};

inline std::vector<std::pair<int, Location>> window_points(
    const Trajectory& suffix, const TimeBinning& bins, const EvalWindow& w,
    int horizon) {
  std::vector<std::pair<int, Location>> out;
  for (const auto& p : suffix.points) {
    int t = bins.timestep(p.timestamp);
    if (w.mode == EvalWindow::Mode::at_horizon && std::abs(t - horizon) > w.width)
      continue;
    out.emplace_back(t, p.location);
  }
  return out;
}

/// Fraction of returned regions containing at least one ground-truth point.
/// Undefined (nullopt) when nothing was returned.
inline std::optional<double> precision_at_k(
    std::span<const std::string> returned,
    std::span<const std::pair<int, Location>> truth, const RegionGrid& grid) {
  if (returned.empty()) return std::nullopt;
  size_t hit = 0;
  for (const auto& id : returned) {
    const Region* r = grid.find(id);
    if (!r) continue;
    for (const auto& [t, loc] : truth) {
      if (r->contains(loc)) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(returned.size());
}

/// Fraction of the distinct occupied grid cells that the returned set covers.
/// The denominator deduplicates, so revisited cells count once. Undefined
/// when no ground-truth point falls inside the grid.
inline std::optional<double> recall_at_k(
    std::span<const std::string> returned,
    std::span<const std::pair<int, Location>> truth, const RegionGrid& grid) {
  std::set<std::string> occupied;
  for (const auto& [t, loc] : truth)
    if (const Region* c = grid.cell_at(loc)) occupied.insert(c->id);
  if (occupied.empty()) return std::nullopt;
  std::set<std::string> ret(returned.begin(), returned.end());
  size_t hit = 0;
  for (const auto& id : occupied)
    if (ret.count(id)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(occupied.size());
}

/// Harmonic mean, 0 when both inputs are 0.
inline double f1_score(double precision, double recall) {
  double s = precision + recall;
  return s > 0 ? 2.0 * precision * recall / s : 0.0;
}

inline double area_km2_of(std::span<const std::string> returned,
                          const RegionGrid& grid) {
  double a = 0;
  std::set<std::string> seen;
  for (const auto& id : returned) {
    if (!seen.insert(id).second) continue;
    if (const Region* r = grid.find(id)) a += r->area_km2();
  }
  return a;
}

/// Recall earned per square kilometre of returned search area.
inline std::optional<double> recall_per_km2(std::optional<double> recall,
                                            double area_km2) {
  if (!recall || area_km2 <= 0) return std::nullopt;
  return *recall / area_km2;
}

/// Least-squares line fit, for the scaling checks. r2 is 1 when the fit is
/// exact and the data has no variance to explain.
struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  LinearFit f;
  size_t n = std::min(x.size(), y.size());
  if (n < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double d = n * sxx - sx * sx;
  if (d == 0) return f;
  f.slope = (n * sxy - sx * sy) / d;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0, mean = sy / n;
  for (size_t i = 0; i < n; ++i) {
    double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
  return f;
}

}  // namespace marlin
