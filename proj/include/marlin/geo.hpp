#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "marlin/interval.hpp"

namespace marlin {

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kKmPerDegree = 111.32;
inline constexpr double kPi = 3.14159265358979323846;

struct Location {
  double lon = 0.0;
  double lat = 0.0;
  bool operator==(const Location&) const = default;
};

inline double deg2rad(double d) { return d * kPi / 180.0; }

/// Great-circle distance in kilometres.
inline double haversine_km(Location a, Location b) {
  double dlat = deg2rad(b.lat - a.lat);
  double dlon = deg2rad(b.lon - a.lon);
  double s = std::sin(dlat / 2), c = std::sin(dlon / 2);
  double h = s * s + std::cos(deg2rad(a.lat)) * std::cos(deg2rad(b.lat)) * c * c;
  h = std::min(1.0, h);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

/// Initial bearing from a to b, degrees in [0, 360).
inline double bearing_deg(Location a, Location b) {
  double phi1 = deg2rad(a.lat), phi2 = deg2rad(b.lat);
  double dlon = deg2rad(b.lon - a.lon);
  double y = std::sin(dlon) * std::cos(phi2);
  double x = std::cos(phi1) * std::sin(phi2) -
             std::sin(phi1) * std::cos(phi2) * std::cos(dlon);
  double deg = std::atan2(y, x) * 180.0 / kPi;
  return deg < 0 ? deg + 360.0 : deg;
}

/// Axis-aligned lon/lat box, half-open: [min_corner, max_corner).
struct Region {
  std::string id;
  Location min_corner, max_corner;

  bool contains(Location p) const {
    return p.lon >= min_corner.lon && p.lon < max_corner.lon &&
           p.lat >= min_corner.lat && p.lat < max_corner.lat;
  }
  Location center() const {
    return {(min_corner.lon + max_corner.lon) / 2,
            (min_corner.lat + max_corner.lat) / 2};
  }
  /// Planar approximation with the usual cos(latitude) shrink of a degree
  /// of longitude.
  double area_km2() const {
    double dlon = max_corner.lon - min_corner.lon;
    double dlat = max_corner.lat - min_corner.lat;
    return dlon * dlat * kKmPerDegree * kKmPerDegree *
           std::cos(deg2rad(center().lat));
  }
};

/// Distance from a point to the nearest point of the box (0 inside).
inline double distance_to_region_km(Location p, const Region& r) {
  Location nearest{std::clamp(p.lon, r.min_corner.lon, r.max_corner.lon),
                   std::clamp(p.lat, r.min_corner.lat, r.max_corner.lat)};
  return haversine_km(p, nearest);
}

/// Uniform grid over an area of interest. Cells are half-open boxes; points
/// exactly on the AOI's far edges are owned by the last row/column so the
/// closed AOI is fully covered. `candidate_ids` and `labels` are filled by
/// the feature stage.
class RegionGrid {
 public:
  RegionGrid() = default;

  RegionGrid(Region aoi, double cell_size_deg) : aoi_(std::move(aoi)), cell_(cell_size_deg) {
    if (!(cell_ > 0)) throw std::invalid_argument("cell size must be positive");
    double w = aoi_.max_corner.lon - aoi_.min_corner.lon;
    double h = aoi_.max_corner.lat - aoi_.min_corner.lat;
    if (!(w > 0) || !(h > 0)) throw std::invalid_argument("empty area of interest");
    cols_ = static_cast<int>(std::ceil(w / cell_ - 1e-9));
    rows_ = static_cast<int>(std::ceil(h / cell_ - 1e-9));
    cells_.reserve(static_cast<size_t>(cols_) * rows_);
    for (int ix = 0; ix < cols_; ++ix) {
      for (int iy = 0; iy < rows_; ++iy) {
        Region c;
        c.id = cell_id(ix, iy);
        c.min_corner = {aoi_.min_corner.lon + ix * cell_, aoi_.min_corner.lat + iy * cell_};
        c.max_corner = {aoi_.min_corner.lon + (ix + 1) * cell_,
                        aoi_.min_corner.lat + (iy + 1) * cell_};
        by_id_.emplace(c.id, cells_.size());
        cells_.push_back(std::move(c));
      }
    }
  }

  static std::string cell_id(int ix, int iy) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "R_%03d_%03d", ix, iy);
    return buf;
  }

  const Region& aoi() const { return aoi_; }
  double cell_size_deg() const { return cell_; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  const std::vector<Region>& cells() const { return cells_; }

  std::optional<size_t> cell_index(Location p) const {
    if (p.lon < aoi_.min_corner.lon || p.lon > aoi_.max_corner.lon ||
        p.lat < aoi_.min_corner.lat || p.lat > aoi_.max_corner.lat)
      return std::nullopt;
    int ix = std::min(cols_ - 1,
                      static_cast<int>((p.lon - aoi_.min_corner.lon) / cell_));
    int iy = std::min(rows_ - 1,
                      static_cast<int>((p.lat - aoi_.min_corner.lat) / cell_));
    return static_cast<size_t>(ix) * rows_ + iy;
  }

  const Region* cell_at(Location p) const {
    auto i = cell_index(p);
    return i ? &cells_[*i] : nullptr;
  }

  const Region* find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &cells_[it->second];
  }

  const std::vector<std::string>& labels_of(const std::string& id) const {
    static const std::vector<std::string> none;
    auto it = labels.find(id);
    return it == labels.end() ? none : it->second;
  }

  /// Region ids eligible as abduction candidates, sorted.
  std::vector<std::string> candidate_ids;
  /// Feature labels per cell id, each list sorted and unique.
  std::unordered_map<std::string, std::vector<std::string>> labels;

 private:
  Region aoi_;
  double cell_ = 0.0;
  int cols_ = 0, rows_ = 0;
  std::vector<Region> cells_;
  std::unordered_map<std::string, size_t> by_id_;
};

inline RegionGrid build_grid(const Region& aoi, double cell_size_deg) {
  return RegionGrid(aoi, cell_size_deg);
}

}  // namespace marlin
