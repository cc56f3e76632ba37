#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "marlin/geo.hpp"
#include "marlin/trajectory.hpp"

namespace marlin {

// Feature label vocabulary.
inline constexpr const char* kNearPort = "nearport";
inline constexpr const char* kHotspot = "hotspot";
inline constexpr const char* kHighSpeed = "high-speed";
inline constexpr const char* kLowSpeed = "low-speed";
inline constexpr const char* kChangeDirection = "change-direction";
inline constexpr const char* kStay = "stay";
inline constexpr const char* kAisOff = "ais-off";
inline constexpr const char* kDraught = "draught";

struct FeatureConfig {
  std::vector<Location> ports;
  double port_radius_km = 10.0;
  double hotspot_quantile = 0.9;      // of the nonzero visit counts
  double speed_sigma = 1.0;           // mean +- sigma * std cutoffs
  double course_change_deg = 30.0;
  double stay_radius_km = 0.5;
  int stay_min_duration = 6;          // timesteps
  double ais_gap_seconds = 3600.0;
  double draught_delta_m = 0.5;
};

namespace feat_detail {

inline double circular_diff_deg(double a, double b) {
  double d = std::fmod(std::fabs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

/// First dwell window: maximal [i, j] with every point within stay_radius of
/// point i and a time span of at least stay_min_duration steps. Returns j or
/// -1 when the trajectory never dwells.
inline int first_dwell_end(const Trajectory& traj, const FeatureConfig& cfg,
                           int64_t step_seconds) {
  const auto& pts = traj.points;
  for (size_t i = 0; i < pts.size(); ++i) {
    size_t j = i;
    while (j + 1 < pts.size() &&
           haversine_km(pts[i].location, pts[j + 1].location) <= cfg.stay_radius_km)
      ++j;
    int64_t span = pts[j].timestamp - pts[i].timestamp;
    if (span >= static_cast<int64_t>(cfg.stay_min_duration) * step_seconds)
      return static_cast<int>(j);
  }
  return -1;
}

/// Index i of the first report followed by a silence longer than ais_gap (or
/// explicitly flagged off); -1 when there is none with a non-empty remainder.
inline int first_gap_start(const Trajectory& traj, const FeatureConfig& cfg) {
  const auto& pts = traj.points;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    double dt = static_cast<double>(pts[i + 1].timestamp - pts[i].timestamp);
    if (dt > cfg.ais_gap_seconds || !pts[i + 1].ais_on) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace feat_detail

/// Cells touched by at least one training report become abduction candidates.
inline void candidate_regions(RegionGrid& grid, std::span<const Trajectory> trajs) {
  std::unordered_set<size_t> seen;
  for (const auto& tr : trajs)
    for (const auto& p : tr.points)
      if (auto idx = grid.cell_index(p.location)) seen.insert(*idx);
  grid.candidate_ids.clear();
  grid.candidate_ids.reserve(seen.size());
  for (size_t idx : seen) grid.candidate_ids.push_back(grid.cells()[idx].id);
  std::sort(grid.candidate_ids.begin(), grid.candidate_ids.end());
}

/// Populates grid.labels from the training trajectories. Port proximity is
/// geographic; every other label is evidence found in the data.
inline void label_regions(RegionGrid& grid, std::span<const Trajectory> trajs,
                          const FeatureConfig& cfg, int64_t step_seconds = 3600) {
  std::unordered_map<size_t, std::unordered_set<std::string>> acc;

  for (size_t ci = 0; ci < grid.cells().size(); ++ci) {
    // ports are few, so the static nearport label is computed for every cell
    // and stays independent of the training set
    for (const auto& port : cfg.ports) {
      if (haversine_km(grid.cells()[ci].center(), port) <= cfg.port_radius_km) {
        acc[ci].insert(kNearPort);
        break;
      }
    }
  }

  std::unordered_map<size_t, long> visits;
  std::unordered_map<size_t, std::pair<double, long>> speed_acc;  // sum, n
  double speed_sum = 0, speed_sq = 0;
  long speed_n = 0;

  for (const auto& tr : trajs) {
    const auto& pts = tr.points;
    for (size_t i = 0; i < pts.size(); ++i) {
      auto idx = grid.cell_index(pts[i].location);
      if (idx) ++visits[*idx];
      if (pts[i].sog) {
        double v = *pts[i].sog;
        speed_sum += v;
        speed_sq += v * v;
        ++speed_n;
        if (idx) {
          auto& sa = speed_acc[*idx];
          sa.first += v;
          ++sa.second;
        }
      }
      // course change at interior points, from positions
      if (i >= 1 && i + 1 < pts.size() && idx) {
        Location a = pts[i - 1].location, b = pts[i].location, c = pts[i + 1].location;
        if (haversine_km(a, b) > 1e-6 && haversine_km(b, c) > 1e-6) {
          double turn = feat_detail::circular_diff_deg(bearing_deg(a, b), bearing_deg(b, c));
          if (turn > cfg.course_change_deg) acc[*idx].insert(kChangeDirection);
        }
      }
      if (i + 1 < pts.size()) {
        double dt = static_cast<double>(pts[i + 1].timestamp - pts[i].timestamp);
        if ((dt > cfg.ais_gap_seconds || !pts[i + 1].ais_on) && idx)
          acc[*idx].insert(kAisOff);
        if (pts[i].draught && pts[i + 1].draught &&
            std::fabs(*pts[i + 1].draught - *pts[i].draught) >= cfg.draught_delta_m) {
          if (auto jdx = grid.cell_index(pts[i + 1].location))
            acc[*jdx].insert(kDraught);
        }
      }
    }
    // each dwell window labels its anchor cell
    for (size_t i = 0; i < pts.size();) {
      size_t j = i;
      while (j + 1 < pts.size() &&
             haversine_km(pts[i].location, pts[j + 1].location) <= cfg.stay_radius_km)
        ++j;
      int64_t span = pts[j].timestamp - pts[i].timestamp;
      if (span >= static_cast<int64_t>(cfg.stay_min_duration) * step_seconds) {
        if (auto idx = grid.cell_index(pts[i].location)) acc[*idx].insert(kStay);
        i = j + 1;
      } else {
        ++i;
      }
    }
  }

  // hotspot: busier than the given quantile of the visited cells
  if (!visits.empty()) {
    std::vector<long> counts;
    counts.reserve(visits.size());
    for (const auto& [_, c] : visits) counts.push_back(c);
    std::sort(counts.begin(), counts.end());
    size_t pos = static_cast<size_t>(
        std::floor(cfg.hotspot_quantile * static_cast<double>(counts.size() - 1)));
    long threshold = counts[pos];
    for (const auto& [idx, c] : visits)
      if (c > threshold) acc[idx].insert(kHotspot);
  }

  if (speed_n > 0) {
    double mean = speed_sum / speed_n;
    double var = speed_sq / speed_n - mean * mean;
    double sd = std::sqrt(std::max(0.0, var));
    if (sd > 1e-9) {
      for (const auto& [idx, sa] : speed_acc) {
        double cell_mean = sa.first / sa.second;
        if (cell_mean > mean + cfg.speed_sigma * sd) acc[idx].insert(kHighSpeed);
        else if (cell_mean < mean - cfg.speed_sigma * sd) acc[idx].insert(kLowSpeed);
      }
    }
  }

  grid.labels.clear();
  for (const auto& [idx, set] : acc) {
    std::vector<std::string> ls(set.begin(), set.end());
    std::sort(ls.begin(), ls.end());
    grid.labels.emplace(grid.cells()[idx].id, std::move(ls));
  }
}

/// Candidate cells a vessel at `last` with `steps_ahead` timesteps of travel
/// time could reach at `max_speed_kmh`. Preserves candidate order (sorted).
inline std::vector<std::string> feasible_regions(const RegionGrid& grid,
                                                 Location last, int steps_ahead,
                                                 double max_speed_kmh,
                                                 int64_t step_seconds = 3600) {
  double hours = std::max(0, steps_ahead) * (static_cast<double>(step_seconds) / 3600.0);
  double budget_km = max_speed_kmh * hours;
  std::vector<std::string> out;
  for (const auto& id : grid.candidate_ids) {
    const Region* r = grid.find(id);
    if (r && distance_to_region_km(last, *r) <= budget_km) out.push_back(id);
  }
  return out;
}

enum class MaskStrategy { mid50, ais_off, stay };

inline std::string to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::mid50: return "mid50";
    case MaskStrategy::ais_off: return "ais_off";
    default: return "stay";
  }
}

struct MaskedPair {
  Trajectory prefix, suffix;
  MaskStrategy requested = MaskStrategy::mid50;
  MaskStrategy applied = MaskStrategy::mid50;
  bool fell_back() const { return applied != requested; }
};

/// Splits a trajectory into an observed prefix and a hidden suffix. ais_off
/// cuts at the first long reporting silence, stay at the end of the first
/// dwell; both fall back to the midpoint split when the trigger is absent or
/// the suffix would be empty.
inline MaskedPair mask(const Trajectory& traj, MaskStrategy strategy,
                       const FeatureConfig& cfg, int64_t step_seconds = 3600) {
  const size_t n = traj.points.size();
  if (n < 4) throw std::invalid_argument("trajectory too short to mask: " +
                                         traj.agent_id);
  auto split_at = [&](size_t prefix_len) {
    MaskedPair mp;
    mp.prefix.agent_id = traj.agent_id;
    mp.suffix.agent_id = traj.agent_id;
    mp.prefix.points.assign(traj.points.begin(), traj.points.begin() + prefix_len);
    mp.suffix.points.assign(traj.points.begin() + prefix_len, traj.points.end());
    return mp;
  };

  MaskedPair mp;
  size_t cut = 0;
  bool found = false;
  if (strategy == MaskStrategy::ais_off) {
    int i = feat_detail::first_gap_start(traj, cfg);
    if (i >= 0 && static_cast<size_t>(i) + 1 < n && i >= 1) {
      cut = static_cast<size_t>(i) + 1;
      found = true;
    }
  } else if (strategy == MaskStrategy::stay) {
    int j = feat_detail::first_dwell_end(traj, cfg, step_seconds);
    if (j >= 1 && static_cast<size_t>(j) + 1 < n) {
      cut = static_cast<size_t>(j) + 1;
      found = true;
    }
  }
  if (strategy == MaskStrategy::mid50 || !found) {
    cut = (n + 1) / 2;
    mp = split_at(cut);
    mp.requested = strategy;
    mp.applied = MaskStrategy::mid50;
    return mp;
  }
  mp = split_at(cut);
  mp.requested = strategy;
  mp.applied = strategy;
  return mp;
}

}  // namespace marlin
