#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlin/geo.hpp"
#include "marlin/trajectory.hpp"
#include "marlin/trajectory_csv.hpp"

namespace marlin {

inline constexpr double kKmPerKnotHour = 1.852;

struct RouteSpec {
  std::vector<Location> waypoints;
  double speed_min_kn = 8.0, speed_max_kn = 12.0;
};

/// A small world to sail synthetic vessels through. Vessels pick a route,
/// follow it with per-leg speeds and positional noise, pause for dwell_steps
/// on first entering a hotspot box, and optionally go silent for gap_steps
/// right after the pause (they keep moving while silent).
struct SynthWorld {
  Region aoi;
  std::vector<Location> ports;
  std::vector<Region> hotspots;
  std::vector<RouteSpec> routes;
  double noise_km = 0.0;
  uint64_t seed = 1;
  int dwell_steps = 0;
  int gap_steps = 0;
  int64_t start_epoch = 1640995200;  // 2022-01-01T00:00:00Z
  double base_draught_m = 5.0;
  double dwell_draught_delta_m = 0.0;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0, uint64_t d = 0) {
  return splitmix64(splitmix64(splitmix64(splitmix64(a) ^ b) ^ c) ^ d);
}

namespace synth_detail {

struct Walker {
  const RouteSpec& route;
  std::vector<double> cum;       // arc length to each waypoint, km
  std::vector<double> leg_speed; // km/h per leg
  double pos_km = 0.0;

  Walker(const RouteSpec& r, std::mt19937_64& rng) : route(r) {
    cum.assign(r.waypoints.size(), 0.0);
    for (size_t i = 1; i < r.waypoints.size(); ++i)
      cum[i] = cum[i - 1] + haversine_km(r.waypoints[i - 1], r.waypoints[i]);
    std::uniform_real_distribution<double> sp(r.speed_min_kn, r.speed_max_kn);
    leg_speed.reserve(r.waypoints.size());
    for (size_t i = 0; i + 1 < r.waypoints.size(); ++i)
      leg_speed.push_back(sp(rng) * kKmPerKnotHour);
    if (leg_speed.empty()) leg_speed.push_back(0.0);
  }

  bool finished() const { return pos_km >= cum.back(); }

  size_t leg_at(double pos) const {
    size_t leg = 0;
    while (leg + 2 < cum.size() && cum[leg + 1] <= pos) ++leg;
    return leg;
  }

  Location location() const {
    double pos = std::min(pos_km, cum.back());
    size_t leg = leg_at(pos);
    double span = cum[leg + 1] - cum[leg];
    double f = span > 0 ? (pos - cum[leg]) / span : 0.0;
    const Location& a = route.waypoints[leg];
    const Location& b = route.waypoints[leg + 1];
    return {a.lon + f * (b.lon - a.lon), a.lat + f * (b.lat - a.lat)};
  }

  double speed_kmh() const {
    if (finished()) return 0.0;
    return leg_speed[leg_at(pos_km)];
  }

  double course() const {
    size_t leg = leg_at(std::min(pos_km, cum.back()));
    return bearing_deg(route.waypoints[leg], route.waypoints[leg + 1]);
  }

  void advance(double hours) { pos_km += speed_kmh() * hours; }
};

}  // namespace synth_detail

/// Deterministic generation: vessel i draws everything from a stream seeded
/// by (world.seed, i), so the corpus is a pure function of the world and the
/// shape parameters.
inline std::vector<Trajectory> generate(const SynthWorld& world, int n_vessels,
                                        int steps_per_vessel,
                                        int64_t bin_seconds = 3600) {
  if (world.routes.empty()) throw std::invalid_argument("world has no routes");
  for (const auto& r : world.routes)
    if (r.waypoints.size() < 2)
      throw std::invalid_argument("routes need at least two waypoints");
  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(std::max(0, n_vessels)));
  const double dt_hours = static_cast<double>(bin_seconds) / 3600.0;

  for (int v = 0; v < n_vessels; ++v) {
    std::mt19937_64 rng(mix_seed(world.seed, static_cast<uint64_t>(v)));
    const RouteSpec& route = world.routes[rng() % world.routes.size()];
    synth_detail::Walker walker(route, rng);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Trajectory tr;
    char name[16];
    std::snprintf(name, sizeof(name), "v%03d", v);
    tr.agent_id = name;

    bool dwelled = false;
    int dwell_left = 0, gap_left = 0;
    double draught = world.base_draught_m;

    for (int s = 0; s < steps_per_vessel; ++s) {
      Location truth = walker.location();
      if (!dwelled && world.dwell_steps > 0) {
        for (const auto& h : world.hotspots) {
          if (h.contains(truth)) {
            dwelled = true;
            dwell_left = world.dwell_steps;
            break;
          }
        }
      }
      bool dwelling = dwell_left > 0;
      bool silent = !dwelling && gap_left > 0;

      if (!silent) {
        TrajectoryPoint p;
        p.timestamp = world.start_epoch + static_cast<int64_t>(s) * bin_seconds;
        double noise_lat = 0, noise_lon = 0;
        if (world.noise_km > 0) {
          double nlat = gauss(rng) * world.noise_km;
          double nlon = gauss(rng) * world.noise_km;
          noise_lat = nlat / kKmPerDegree;
          noise_lon = nlon / (kKmPerDegree * std::cos(deg2rad(truth.lat)));
        }
        p.location = {std::clamp(truth.lon + noise_lon, world.aoi.min_corner.lon,
                                 world.aoi.max_corner.lon),
                      std::clamp(truth.lat + noise_lat, world.aoi.min_corner.lat,
                                 world.aoi.max_corner.lat)};
        double kmh = dwelling ? 0.0 : walker.speed_kmh();
        p.sog = kmh / kKmPerKnotHour;
        p.cog = walker.course();
        p.heading = p.cog;
        p.draught = draught;
        tr.points.push_back(p);
      }

      if (dwelling) {
        --dwell_left;
        if (dwell_left == 0) {
          gap_left = world.gap_steps;
          draught += world.dwell_draught_delta_m;
        }
      } else {
        if (silent) --gap_left;
        walker.advance(dt_hours);
      }
    }
    out.push_back(std::move(tr));
  }
  return out;
}

/// Flat text world description:
///   aoi=30,45,31,46
///   port=30.05,45.05
///   hotspot=30.5,45.5,30.6,45.6
///   route=30.05,45.05;30.5,45.5;30.95,45.9 @ 8:12
///   noise_km=0.2   seed=7   dwell_steps=0   gap_steps=0
inline SynthWorld parse_world_config(std::istream& in) {
  SynthWorld w;
  bool have_aoi = false;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw std::runtime_error("world config line " + std::to_string(line_no) +
                             ": " + msg);
  };
  auto nums = [&](const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        v.push_back(std::stod(tok));
      } catch (...) {
        fail("bad number `" + tok + "`");
      }
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key=value");
    std::string key = line.substr(b, line.find_last_not_of(" \t", eq - 1) - b + 1);
    std::string val = line.substr(eq + 1);
    size_t vb = val.find_first_not_of(" \t");
    val = vb == std::string::npos ? "" : val.substr(vb, val.find_last_not_of(" \t") - vb + 1);

    if (key == "aoi") {
      auto v = nums(val);
      if (v.size() != 4) fail("aoi needs min_lon,min_lat,max_lon,max_lat");
      w.aoi = {"aoi", {v[0], v[1]}, {v[2], v[3]}};
      have_aoi = true;
    } else if (key == "port") {
      auto v = nums(val);
      if (v.size() != 2) fail("port needs lon,lat");
      w.ports.push_back({v[0], v[1]});
    } else if (key == "hotspot") {
      auto v = nums(val);
      if (v.size() != 4) fail("hotspot needs min_lon,min_lat,max_lon,max_lat");
      w.hotspots.push_back({"hotspot", {v[0], v[1]}, {v[2], v[3]}});
    } else if (key == "route") {
      RouteSpec r;
      std::string path = val;
      size_t at = val.find('@');
      if (at != std::string::npos) {
        path = val.substr(0, at);
        std::string sp = val.substr(at + 1);
        size_t colon = sp.find(':');
        if (colon == std::string::npos) fail("route speeds need min:max knots");
        try {
          r.speed_min_kn = std::stod(sp.substr(0, colon));
          r.speed_max_kn = std::stod(sp.substr(colon + 1));
        } catch (...) {
          fail("bad route speed");
        }
      }
      std::stringstream ss(path);
      std::string wp;
      while (std::getline(ss, wp, ';')) {
        if (wp.find_first_not_of(" \t") == std::string::npos) continue;
        auto v = nums(wp);
        if (v.size() != 2) fail("waypoint needs lon,lat");
        r.waypoints.push_back({v[0], v[1]});
      }
      if (r.waypoints.size() < 2) fail("route needs at least two waypoints");
      if (!(r.speed_min_kn <= r.speed_max_kn) || r.speed_min_kn < 0)
        fail("route speeds must satisfy 0 <= min <= max");
      w.routes.push_back(std::move(r));
    } else if (key == "noise_km") {
      w.noise_km = std::stod(val);
    } else if (key == "seed") {
      w.seed = std::stoull(val);
    } else if (key == "dwell_steps") {
      w.dwell_steps = std::stoi(val);
    } else if (key == "gap_steps") {
      w.gap_steps = std::stoi(val);
    } else if (key == "start") {
      auto ts = parse_timestamp(val);
      if (!ts) fail("bad start timestamp");
      w.start_epoch = *ts;
    } else if (key == "base_draught_m") {
      w.base_draught_m = std::stod(val);
    } else if (key == "dwell_draught_delta_m") {
      w.dwell_draught_delta_m = std::stod(val);
    } else {
      fail("unknown key `" + key + "`");
    }
  }
  if (!have_aoi) throw std::runtime_error("world config: missing aoi");
  if (w.routes.empty()) throw std::runtime_error("world config: missing route");
  return w;
}

inline SynthWorld parse_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world config: " + path);
  return parse_world_config(in);
}

}  // namespace marlin
