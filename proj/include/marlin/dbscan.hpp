#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>
#include <vector>

#include "marlin/geo.hpp"
#include "marlin/trajectory.hpp"

namespace marlin {

/// Resamples a polyline to `n` points at equal arc-length spacing, so shapes
/// of different report density become comparable.
inline std::vector<Location> resample_polyline(std::span<const Location> pts, int n) {
  std::vector<Location> out;
  if (pts.empty() || n <= 0) return out;
  out.reserve(static_cast<size_t>(n));
  if (pts.size() == 1) {
    out.assign(static_cast<size_t>(n), pts[0]);
    return out;
  }
  std::vector<double> cum(pts.size(), 0.0);
  for (size_t i = 1; i < pts.size(); ++i)
    cum[i] = cum[i - 1] + haversine_km(pts[i - 1], pts[i]);
  double total = cum.back();
  if (total <= 0) {
    out.assign(static_cast<size_t>(n), pts[0]);
    return out;
  }
  size_t seg = 1;
  for (int k = 0; k < n; ++k) {
    double target = total * k / (n - 1);
    while (seg + 1 < pts.size() && cum[seg] < target) ++seg;
    double span = cum[seg] - cum[seg - 1];
    double f = span > 0 ? (target - cum[seg - 1]) / span : 0.0;
    f = std::clamp(f, 0.0, 1.0);
    out.push_back({pts[seg - 1].lon + f * (pts[seg].lon - pts[seg - 1].lon),
                   pts[seg - 1].lat + f * (pts[seg].lat - pts[seg - 1].lat)});
  }
  return out;
}

/// Mean pointwise great-circle distance between two equally resampled shapes.
inline double shape_distance_km(std::span<const Location> a,
                                std::span<const Location> b) {
  double sum = 0;
  size_t n = std::min(a.size(), b.size());
  if (n == 0) return 0;
  for (size_t i = 0; i < n; ++i) sum += haversine_km(a[i], b[i]);
  return sum / static_cast<double>(n);
}

struct ClusterResult {
  std::vector<int> labels;  // cluster id per input, -1 for noise
  int n_clusters = 0;
};

/// Density clustering of trajectory shapes. Deterministic: inputs are visited
/// in order and neighbor expansion is by ascending index, so labels depend
/// only on the data and parameters.
inline ClusterResult cluster_trajectories(std::span<const Trajectory> trajs,
                                          double eps_km, int min_pts,
                                          int resample_n = 32) {
  const size_t n = trajs.size();
  std::vector<std::vector<Location>> shapes(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<Location> pts;
    pts.reserve(trajs[i].points.size());
    for (const auto& p : trajs[i].points) pts.push_back(p.location);
    shapes[i] = resample_polyline(pts, resample_n);
  }

  auto neighbors = [&](size_t i) {
    std::vector<size_t> out;
    for (size_t j = 0; j < n; ++j)
      if (j != i && shape_distance_km(shapes[i], shapes[j]) <= eps_km)
        out.push_back(j);
    return out;
  };

  constexpr int kUnvisited = -2, kNoise = -1;
  ClusterResult res;
  res.labels.assign(n, kUnvisited);
  for (size_t i = 0; i < n; ++i) {
    if (res.labels[i] != kUnvisited) continue;
    auto nb = neighbors(i);
    if (nb.size() + 1 < static_cast<size_t>(min_pts)) {
      res.labels[i] = kNoise;
      continue;
    }
    int cluster = res.n_clusters++;
    res.labels[i] = cluster;
    std::deque<size_t> queue(nb.begin(), nb.end());
    while (!queue.empty()) {
      size_t j = queue.front();
      queue.pop_front();
      if (res.labels[j] == kNoise) res.labels[j] = cluster;
      if (res.labels[j] != kUnvisited) continue;
      res.labels[j] = cluster;
      auto nj = neighbors(j);
      if (nj.size() + 1 >= static_cast<size_t>(min_pts))
        queue.insert(queue.end(), nj.begin(), nj.end());
    }
  }
  return res;
}

}  // namespace marlin
