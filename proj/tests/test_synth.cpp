#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "marlin/synth.hpp"

using namespace marlin;

namespace {

SynthWorld straight_world() {
  SynthWorld w;
  w.aoi = {"aoi", {30.0, 45.0}, {31.0, 46.0}};
  RouteSpec r;
  r.waypoints = {{30.05, 45.5}, {30.95, 45.5}};
  r.speed_min_kn = 10.0;
  r.speed_max_kn = 10.0;
  w.routes = {r};
  w.seed = 42;
  return w;
}

}  // namespace

TEST_CASE("generation is a pure function of world and parameters") {
  SynthWorld w = straight_world();
  w.noise_km = 0.3;
  auto a = generate(w, 5, 20);
  auto b = generate(w, 5, 20);
  REQUIRE(a.size() == 5);
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].points.size() == b[i].points.size());
    CHECK(a[i].agent_id == b[i].agent_id);
    for (size_t j = 0; j < a[i].points.size(); ++j) {
      CHECK(a[i].points[j].location == b[i].points[j].location);
      CHECK(a[i].points[j].timestamp == b[i].points[j].timestamp);
    }
  }
  SECTION("another seed changes the corpus") {
    w.seed = 43;
    auto c = generate(w, 5, 20);
    bool differs = false;
    for (size_t j = 0; j < a[0].points.size() && !differs; ++j)
      differs = !(c[0].points[j].location == a[0].points[j].location);
    CHECK(differs);
  }
}

TEST_CASE("vessel ids and timestamps follow the step grid") {
  SynthWorld w = straight_world();
  auto trajs = generate(w, 3, 4, 1800);
  REQUIRE(trajs.size() == 3);
  CHECK(trajs[0].agent_id == "v000");
  CHECK(trajs[2].agent_id == "v002");
  REQUIRE(trajs[0].points.size() == 4);
  CHECK(trajs[0].points[0].timestamp == w.start_epoch);
  CHECK(trajs[0].points[1].timestamp == w.start_epoch + 1800);
  CHECK(trajs[0].timestamps_ok());
}

TEST_CASE("noise-free fixed-speed vessels sail identical tracks") {
  SynthWorld w = straight_world();
  auto trajs = generate(w, 2, 10);
  for (size_t j = 0; j < trajs[0].points.size(); ++j) {
    CHECK(trajs[0].points[j].location == trajs[1].points[j].location);
    CHECK(trajs[0].points[j].sog == trajs[1].points[j].sog);
  }
  CHECK(*trajs[0].points[0].sog == 10.0);
  CHECK(trajs[0].points[0].location == Location{30.05, 45.5});
  SECTION("progress follows speed times time") {
    double hop = haversine_km(trajs[0].points[0].location,
                              trajs[0].points[1].location);
    CHECK(hop == Catch::Approx(10.0 * kKmPerKnotHour).margin(1e-3));
  }
}

TEST_CASE("vessels stay inside the area of interest") {
  SynthWorld w = straight_world();
  w.noise_km = 5.0;
  auto trajs = generate(w, 8, 30);
  for (const auto& tr : trajs) {
    for (const auto& p : tr.points) {
      CHECK(p.location.lon >= w.aoi.min_corner.lon);
      CHECK(p.location.lon <= w.aoi.max_corner.lon);
      CHECK(p.location.lat >= w.aoi.min_corner.lat);
      CHECK(p.location.lat <= w.aoi.max_corner.lat);
    }
  }
}

TEST_CASE("hotspot entry triggers a dwell, then a silent gap") {
  SynthWorld w = straight_world();
  w.routes[0].waypoints = {{30.05, 45.5}, {30.95, 45.5}, {30.05, 45.55},
                           {30.95, 45.55}};
  w.hotspots = {{"h", {30.4, 45.4}, {30.6, 45.6}}};
  w.dwell_steps = 3;
  w.gap_steps = 2;
  w.dwell_draught_delta_m = 1.0;
  auto trajs = generate(w, 1, 12);
  const auto& pts = trajs[0].points;
  REQUIRE(pts.size() == 12u - 2u);  // the two silent steps are unreported

  // find the dwell: three consecutive reports at the same spot with sog 0
  int dwell_start = -1;
  for (size_t j = 0; j + 1 < pts.size(); ++j) {
    if (pts[j].location == pts[j + 1].location) {
      dwell_start = static_cast<int>(j);
      break;
    }
  }
  REQUIRE(dwell_start >= 0);
  CHECK(pts[dwell_start].location == pts[dwell_start + 2].location);
  CHECK(*pts[dwell_start].sog == 0.0);
  CHECK(*pts[dwell_start + 2].sog == 0.0);
  CHECK(pts[dwell_start].location.lon >= 30.4);
  CHECK(pts[dwell_start].location.lon < 30.6);

  SECTION("the gap hides reports but the vessel keeps moving") {
    int last_dwell = dwell_start + 2;
    int64_t dt = pts[last_dwell + 1].timestamp - pts[last_dwell].timestamp;
    CHECK(dt == 3 * 3600);  // two silent bins skipped
    double moved = haversine_km(pts[last_dwell].location,
                                pts[last_dwell + 1].location);
    CHECK(moved > 25.0);  // three hours underway, partly along the return leg
  }

  SECTION("draught steps up after the dwell") {
    CHECK(*pts[dwell_start].draught == 5.0);
    int last_dwell = dwell_start + 2;
    CHECK(*pts[last_dwell + 1].draught == 6.0);
  }

  SECTION("each vessel dwells once") {
    size_t zero_sog = 0;
    for (const auto& p : pts)
      if (*p.sog == 0.0) ++zero_sog;
    CHECK(zero_sog == 3);
  }
}

TEST_CASE("route ends leave the vessel stationary") {
  SynthWorld w = straight_world();
  RouteSpec r;
  r.waypoints = {{30.05, 45.5}, {30.1, 45.5}};
  r.speed_min_kn = 10.0;
  r.speed_max_kn = 10.0;
  w.routes = {r};
  auto trajs = generate(w, 1, 8);
  const auto& pts = trajs[0].points;
  CHECK(pts.back().location.lon == Catch::Approx(30.1).margin(1e-9));
  CHECK(pts.back().location.lat == Catch::Approx(45.5).margin(1e-9));
  CHECK(*pts.back().sog == 0.0);
}

TEST_CASE("degenerate worlds are rejected") {
  SynthWorld w = straight_world();
  w.routes.clear();
  CHECK_THROWS_AS(generate(w, 1, 5), std::invalid_argument);
  RouteSpec r;
  r.waypoints = {{30.0, 45.0}};
  w.routes = {r};
  CHECK_THROWS_AS(generate(w, 1, 5), std::invalid_argument);
}

TEST_CASE("world configs parse") {
  std::istringstream in(
      "# demo world\n"
      "aoi = 30,45,31,46\n"
      "port = 30.05,45.05\n"
      "hotspot = 30.5,45.5,30.6,45.6\n"
      "route = 30.05,45.05; 30.5,45.5; 30.95,45.9 @ 8:12\n"
      "route = 30.05,45.9; 30.95,45.05\n"
      "noise_km = 0.2\n"
      "seed = 7\n"
      "dwell_steps = 4\n"
      "gap_steps = 3\n"
      "start = 2022-01-01T00:00:00Z\n"
      "base_draught_m = 6\n"
      "dwell_draught_delta_m = 0.75\n");
  SynthWorld w = parse_world_config(in);
  CHECK(w.aoi.min_corner == Location{30, 45});
  CHECK(w.aoi.max_corner == Location{31, 46});
  REQUIRE(w.ports.size() == 1);
  REQUIRE(w.hotspots.size() == 1);
  REQUIRE(w.routes.size() == 2);
  CHECK(w.routes[0].waypoints.size() == 3);
  CHECK(w.routes[0].speed_min_kn == 8.0);
  CHECK(w.routes[0].speed_max_kn == 12.0);
  CHECK(w.routes[1].speed_min_kn == 8.0);  // default band
  CHECK(w.noise_km == 0.2);
  CHECK(w.seed == 7);
  CHECK(w.dwell_steps == 4);
  CHECK(w.gap_steps == 3);
  CHECK(w.start_epoch == 1640995200);
  CHECK(w.base_draught_m == 6.0);
  CHECK(w.dwell_draught_delta_m == 0.75);
}

TEST_CASE("world config errors carry the line number") {
  auto expect_error = [](const std::string& text, const std::string& frag) {
    std::istringstream in(text);
    try {
      parse_world_config(in);
      FAIL("expected an error for: " << text);
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(frag) != std::string::npos);
    }
  };
  expect_error("aoi=30,45,31\nroute=30,45;31,46\n", "line 1");
  expect_error("aoi=30,45,31,46\nroute=30,45\n", "line 2");
  expect_error("aoi=30,45,31,46\nroute=30,45;31,46\nwat=1\n", "unknown key");
  expect_error("route=30,45;31,46\n", "missing aoi");
  expect_error("aoi=30,45,31,46\n", "missing route");
  expect_error("aoi=30,45,31,46\nroute=30,45;31,46 @ 9\n", "min:max");
  expect_error("aoi=30,45,31,46\nroute=30,45;xx,46\n", "bad number");
}
