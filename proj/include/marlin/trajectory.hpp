#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlin/geo.hpp"

namespace marlin {

/// One AIS report. Optional kinematic fields may be missing in real feeds.
struct TrajectoryPoint {
  int64_t timestamp = 0;  // seconds since the epoch, UTC
  Location location;
  std::optional<double> sog;      // speed over ground, knots
  std::optional<double> cog;      // course over ground, degrees
  std::optional<double> heading;  // degrees
  std::optional<double> draught;  // metres
  bool ais_on = true;
};

/// Reports of one vessel, timestamps strictly increasing.
struct Trajectory {
  std::string agent_id;
  std::vector<TrajectoryPoint> points;

  bool timestamps_ok() const {
    for (size_t i = 1; i < points.size(); ++i)
      if (points[i].timestamp <= points[i - 1].timestamp) return false;
    return true;
  }
};

/// Maps wall-clock seconds onto model timesteps by flooring into fixed bins.
struct TimeBinning {
  int64_t origin = 0;
  int64_t bin_seconds = 3600;

  int timestep(int64_t ts) const {
    int64_t d = ts - origin;
    int64_t q = d / bin_seconds;
    if (d % bin_seconds != 0 && d < 0) --q;
    return static_cast<int>(q);
  }
};

/// Timestep -> region id, at most one entry per timestep (the latest report
/// in the bin wins). Points outside the grid are dropped and counted; bins
/// nobody reported in are simply absent — no interpolation.
struct RegionSequence {
  std::vector<std::pair<int, std::string>> entries;  // ascending timesteps
  size_t dropped_outside = 0;
};

inline RegionSequence to_region_sequence(const Trajectory& traj,
                                         const RegionGrid& grid,
                                         const TimeBinning& bins) {
  RegionSequence out;
  for (const auto& p : traj.points) {
    auto idx = grid.cell_index(p.location);
    if (!idx) {
      ++out.dropped_outside;
      continue;
    }
    int t = bins.timestep(p.timestamp);
    const std::string& id = grid.cells()[*idx].id;
    if (!out.entries.empty() && out.entries.back().first == t)
      out.entries.back().second = id;
    else
      out.entries.emplace_back(t, id);
  }
  return out;
}

/// Timestep -> sorted feature labels of the occupied region. Timesteps whose
/// region carries no labels yield an empty list (kept, so gaps stay visible).
inline std::vector<std::pair<int, std::vector<std::string>>> to_label_sequence(
    const RegionSequence& seq, const RegionGrid& grid) {
  std::vector<std::pair<int, std::vector<std::string>>> out;
  out.reserve(seq.entries.size());
  for (const auto& [t, id] : seq.entries) {
    if (!grid.find(id)) throw std::invalid_argument("unknown region id: " + id);
    out.emplace_back(t, grid.labels_of(id));
  }
  return out;
}

}  // namespace marlin
