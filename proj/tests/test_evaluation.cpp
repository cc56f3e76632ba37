#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "marlin/evaluation.hpp"

using namespace marlin;

namespace {

std::vector<Trajectory> demo_corpus(int vessels = 12, int steps = 14) {
  SynthWorld w;
  w.aoi = {"aoi", {30.0, 45.0}, {31.0, 46.0}};
  w.ports = {{30.05, 45.05}};
  w.hotspots = {{"h", {30.45, 45.45}, {30.55, 45.55}}};
  RouteSpec a;
  a.waypoints = {{30.05, 45.05}, {30.5, 45.5}, {30.95, 45.95}};
  a.speed_min_kn = 9.0;
  a.speed_max_kn = 11.0;
  RouteSpec b;
  b.waypoints = {{30.05, 45.95}, {30.5, 45.5}, {30.95, 45.05}};
  b.speed_min_kn = 9.0;
  b.speed_max_kn = 11.0;
  w.routes = {a, b};
  w.noise_km = 0.05;
  w.seed = 11;
  w.dwell_steps = 2;
  w.gap_steps = 2;
  return generate(w, vessels, steps);
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.cell_deg = 0.1;
  cfg.aoi = Region{"aoi", {30.0, 45.0}, {31.0, 46.0}};
  cfg.ks = {1, 3};
  cfg.k = 3;
  cfg.runtime_ks = {1, 2, 3};
  cfg.horizon_offsets = {1, 2};
  cfg.cell_sweep = {0.1, 0.2};
  cfg.train_fractions = {0.5, 1.0};
  cfg.min_support = 1;
  cfg.min_confidence = 0.0;
  cfg.rnd_trials = 2;
  cfg.features.hotspot_quantile = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("the data bounding box pads the extremes") {
  std::vector<Trajectory> trajs(1);
  trajs[0].agent_id = "v";
  TrajectoryPoint p1, p2;
  p1.location = {30.2, 45.1};
  p2.location = {30.9, 45.8};
  p2.timestamp = 60;
  trajs[0].points = {p1, p2};
  Region r = data_aoi(trajs, 0.05);
  CHECK(r.min_corner.lon == 30.2 - 0.05);
  CHECK(r.max_corner.lat == 45.8 + 0.05);
  CHECK_THROWS_AS(data_aoi(std::vector<Trajectory>{}, 0.1), std::invalid_argument);
}

TEST_CASE("the train/test split is deterministic and sorted") {
  std::vector<Trajectory> trajs(5);
  const char* names[] = {"e", "c", "a", "d", "b"};
  for (int i = 0; i < 5; ++i) trajs[i].agent_id = names[i];
  auto [train, test] = split_train_test(trajs, 0.7);
  REQUIRE(train.size() == 4);  // ceil(3.5)
  REQUIRE(test.size() == 1);
  CHECK(train[0].agent_id == "a");
  CHECK(train[3].agent_id == "d");
  CHECK(test[0].agent_id == "e");
  auto [train2, test2] = split_train_test(trajs, 0.7);
  CHECK(train2.size() == train.size());
  CHECK(test2[0].agent_id == test[0].agent_id);
  SECTION("extreme fractions") {
    auto [t0, s0] = split_train_test(trajs, 0.0);
    CHECK(t0.empty());
    CHECK(s0.size() == 5);
    auto [t1, s1] = split_train_test(trajs, 1.0);
    CHECK(t1.size() == 5);
    CHECK(s1.empty());
  }
}

TEST_CASE("sampling without replacement is uniform and prefix-stable") {
  std::vector<std::string> pool{"a", "b", "c", "d"};
  SECTION("no duplicates, full coverage") {
    std::mt19937_64 rng(5);
    auto s = sample_without_replacement(pool, 4, rng);
    std::set<std::string> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 4);
  }
  SECTION("k beyond the pool clips") {
    std::mt19937_64 rng(5);
    CHECK(sample_without_replacement(pool, 99, rng).size() == 4);
  }
  SECTION("the first draws form the smaller sample") {
    std::mt19937_64 r1(123), r2(123);
    auto big = sample_without_replacement(pool, 4, r1);
    auto small = sample_without_replacement(pool, 2, r2);
    REQUIRE(small.size() == 2);
    CHECK(big[0] == small[0]);
    CHECK(big[1] == small[1]);
  }
  SECTION("singleton draws are uniform within 3 sigma") {
    std::map<std::string, int> hits;
    std::mt19937_64 rng(777);
    const int n = 4000;
    for (int i = 0; i < n; ++i)
      ++hits[sample_without_replacement(pool, 1, rng)[0]];
    for (const auto& [id, c] : hits) {
      CHECK(c > 1000 - 83);
      CHECK(c < 1000 + 83);
    }
  }
}

TEST_CASE("aggregation averages non-failed rows per group") {
  std::vector<SweepRow> rows;
  SweepRow a;
  a.suite = "s";
  a.method = "ABD";
  a.param = "p";
  a.agent = "v1";
  a.k = 1;
  a.precision = 0.5;
  a.recall = 0.5;
  a.f1 = 0.5;
  a.area_km2 = 10;
  a.rpk = 0.05;
  a.ms = 2;
  rows.push_back(a);
  SweepRow b = a;
  b.agent = "v2";
  b.precision = 0.7;
  b.recall = 0.7;
  b.f1 = 0.7;
  b.area_km2 = 20;
  b.rpk = std::nullopt;
  b.ms = 4;
  rows.push_back(b);
  SweepRow c = a;
  c.agent = "v3";
  c.k = 2;
  rows.push_back(c);
  SweepRow fail;
  fail.suite = "s";
  fail.method = "none";
  fail.param = "p";
  fail.agent = "v4";
  fail.failed = true;
  fail.note = "degenerate mask";
  rows.push_back(fail);

  auto ags = aggregate_rows(rows);
  REQUIRE(ags.size() == 2);
  const AggregateRow* g1 = nullptr;
  const AggregateRow* g2 = nullptr;
  for (const auto& g : ags) {
    if (g.k == 1) g1 = &g;
    if (g.k == 2) g2 = &g;
  }
  REQUIRE(g1 != nullptr);
  REQUIRE(g2 != nullptr);
  CHECK(g1->n == 2);
  CHECK(g1->precision == Catch::Approx(0.6));
  CHECK(g1->f1 == Catch::Approx(0.6));
  CHECK(g1->area_km2 == Catch::Approx(15.0));
  CHECK(g1->ms == Catch::Approx(3.0));
  CHECK(g1->rpk == Catch::Approx(0.05));  // only the defined value counts
  CHECK(g1->failures == 1);
  CHECK(g2->n == 1);
  CHECK(g2->failures == 1);  // failures attach to the (suite, param) pair
}

TEST_CASE("prepared worlds learn rules from the training half") {
  auto corpus = demo_corpus();
  auto cfg = tiny_config();
  PreparedWorld w = prepare_world(corpus, cfg);
  CHECK(w.train.size() == 9);  // ceil(0.7 * 12)
  CHECK(w.test.size() == 3);
  CHECK_FALSE(w.grid.candidate_ids.empty());
  CHECK_FALSE(w.grid.labels.empty());
  CHECK_FALSE(w.rules.rules.empty());
  CHECK_FALSE(w.per_cluster);
  CHECK(&w.rules_for(w.test[0]) == &w.rules.rules);
}

TEST_CASE("per-cluster preparation learns one rule set per bundle") {
  auto corpus = demo_corpus(12, 14);
  auto cfg = tiny_config();
  cfg.per_cluster = true;
  cfg.cluster_eps_km = 15.0;
  cfg.cluster_min_pts = 2;
  PreparedWorld w = prepare_world(corpus, cfg);
  REQUIRE(w.per_cluster);
  CHECK(w.clusters.n_clusters >= 1);
  CHECK(w.cluster_rules.size() == static_cast<size_t>(w.clusters.n_clusters));
  CHECK(w.cluster_shapes.size() == w.cluster_rules.size());
  const auto& chosen = w.rules_for(w.test[0]);
  bool is_known = &chosen == &w.rules.rules;
  for (const auto& cr : w.cluster_rules)
    if (&chosen == &cr.rules) is_known = true;
  CHECK(is_known);
}

TEST_CASE("the k-sweep suite compares abduction with random baselines") {
  auto corpus = demo_corpus();
  auto cfg = tiny_config();
  auto res = run_suite("f1_vs_k", corpus, cfg);
  REQUIRE_FALSE(res.rows.empty());

  std::set<std::string> methods;
  std::set<int> ks;
  for (const auto& r : res.rows) {
    CHECK(r.suite == "f1_vs_k");
    if (!r.failed) {
      methods.insert(r.method);
      ks.insert(r.k);
    }
  }
  CHECK(methods == std::set<std::string>{"ABD", "RND"});
  CHECK(ks == std::set<int>{1, 3});

  SECTION("aggregates mirror the row means") {
    for (const auto& g : res.aggregates) {
      double f1_sum = 0;
      long n = 0;
      for (const auto& r : res.rows) {
        if (r.failed || r.method != g.method || r.k != g.k || r.param != g.param)
          continue;
        f1_sum += r.f1;
        ++n;
      }
      CHECK(g.n == n);
      if (n > 0) CHECK(g.f1 == Catch::Approx(f1_sum / static_cast<double>(n)));
    }
  }

  SECTION("the run is reproducible") {
    auto again = run_suite("f1_vs_k", corpus, cfg);
    REQUIRE(again.rows.size() == res.rows.size());
    for (size_t i = 0; i < res.rows.size(); ++i) {
      CHECK(again.rows[i].method == res.rows[i].method);
      CHECK(again.rows[i].agent == res.rows[i].agent);
      CHECK(again.rows[i].k == res.rows[i].k);
      CHECK(again.rows[i].f1 == res.rows[i].f1);
      CHECK(again.rows[i].area_km2 == res.rows[i].area_km2);
    }
  }

  SECTION("RND trials reuse the sample prefix across k") {
    // a trial's k=1 pick must be the first element of its k=3 pick, which
    // shows as recall(k=1) <= recall(k=3) on every paired row
    std::map<std::tuple<std::string, int>, std::map<int, double>> recalls;
    for (const auto& r : res.rows)
      if (!r.failed && r.method == "RND" && r.recall)
        recalls[{r.agent, r.trial}][r.k] = *r.recall;
    for (const auto& [key, by_k] : recalls) {
      if (by_k.count(1) && by_k.count(3))
        CHECK(by_k.at(1) <= by_k.at(3) + 1e-12);
    }
  }
}

TEST_CASE("the horizon suite emits one parameter per offset") {
  auto corpus = demo_corpus();
  auto cfg = tiny_config();
  auto res = run_suite("f1_vs_horizon", corpus, cfg);
  std::set<std::string> params;
  for (const auto& r : res.rows) params.insert(r.param);
  CHECK(params == std::set<std::string>{"1", "2"});
}

TEST_CASE("sweep suites vary their parameter") {
  auto corpus = demo_corpus();
  auto cfg = tiny_config();
  SECTION("region size") {
    auto res = run_suite("region_size_sweep", corpus, cfg);
    std::set<std::string> params;
    for (const auto& r : res.rows) params.insert(r.param);
    CHECK(params == std::set<std::string>{"0.1", "0.2"});
  }
  SECTION("rule type") {
    auto res = run_suite("rule_type_ablation", corpus, cfg);
    std::set<std::string> params;
    for (const auto& r : res.rows) params.insert(r.param);
    CHECK(params == std::set<std::string>{"single", "multi"});
  }
  SECTION("masking") {
    auto res = run_suite("masking_ablation", corpus, cfg);
    std::set<std::string> params;
    for (const auto& r : res.rows) params.insert(r.param);
    CHECK(params == std::set<std::string>{"mid50", "ais_off", "stay"});
  }
  SECTION("data efficiency") {
    auto res = run_suite("data_efficiency", corpus, cfg);
    std::set<std::string> params;
    for (const auto& r : res.rows) params.insert(r.param);
    CHECK(params == std::set<std::string>{"0.5", "1"});
  }
  SECTION("unknown suites are rejected") {
    CHECK_THROWS_AS(run_suite("nope", corpus, cfg), std::invalid_argument);
  }
}

TEST_CASE("the runtime suite times abduction and fits a line") {
  auto corpus = demo_corpus();
  auto cfg = tiny_config();
  auto res = run_suite("runtime_vs_k", corpus, cfg);
  bool any_abd = false;
  for (const auto& g : res.aggregates) {
    if (g.method == "ABD") {
      any_abd = true;
      CHECK(g.ms >= 0.0);
    }
  }
  CHECK(any_abd);
  CHECK(std::isfinite(res.fit.slope));
  CHECK(std::isfinite(res.fit.r2));
}

TEST_CASE("suite results serialize to annotated CSVs") {
  auto corpus = demo_corpus();
  auto cfg = tiny_config();
  auto res = run_suite("f1_vs_k", corpus, cfg);

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() /
                 ("marlin_eval_test_" + std::to_string(::getpid()));
  write_suite_csvs(dir.string(), res, cfg);

  std::ifstream pq(dir / "f1_vs_k_per_query.csv");
  REQUIRE(pq.good());
  std::string line;
  std::getline(pq, line);
  CHECK(line == "# suite=f1_vs_k");
  bool saw_header = false;
  size_t data_rows = 0;
  while (std::getline(pq, line)) {
    if (line.rfind("# ", 0) == 0) {
      CHECK_FALSE(saw_header);
      continue;
    }
    if (!saw_header) {
      CHECK(line ==
            "suite,method,param,trial,agent,k,failed,precision,recall,f1,"
            "area_km2,recall_per_km2,ms,note");
      saw_header = true;
      continue;
    }
    ++data_rows;
  }
  CHECK(saw_header);
  CHECK(data_rows == res.rows.size());

  std::ifstream ag(dir / "f1_vs_k_aggregate.csv");
  REQUIRE(ag.good());
  size_t ag_rows = 0;
  bool ag_header = false;
  while (std::getline(ag, line)) {
    if (line.rfind("# ", 0) == 0) continue;
    if (!ag_header) {
      ag_header = true;
      continue;
    }
    ++ag_rows;
  }
  CHECK(ag_rows == res.aggregates.size());

  SECTION("runtime CSVs carry the fit") {
    auto rt = run_suite("runtime_vs_k", corpus, cfg);
    write_suite_csvs(dir.string(), rt, cfg);
    std::ifstream f(dir / "runtime_vs_k_aggregate.csv");
    std::string all((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    CHECK(all.find("# fit_slope_ms_per_k=") != std::string::npos);
    CHECK(all.find("# fit_intercept_ms=") != std::string::npos);
    CHECK(all.find("# fit_r2=") != std::string::npos);
  }
  fs::remove_all(dir);
}
