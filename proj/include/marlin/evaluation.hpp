#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "marlin/abduce.hpp"
#include "marlin/dbscan.hpp"
#include "marlin/features.hpp"
#include "marlin/learner.hpp"
#include "marlin/metrics.hpp"
#include "marlin/synth.hpp"
#include "marlin/trajectory.hpp"

namespace marlin {

struct ExperimentConfig {
  double cell_deg = 0.025;
  int64_t bin_seconds = 3600;
  FeatureConfig features;
  Hop hop = Hop::single;
  long min_support = 2;
  double min_confidence = 0.05;
  int max_hops = 0;
  MaskStrategy mask_strategy = MaskStrategy::mid50;
  std::vector<int> ks = {1, 5, 10, 20};
  int k = 10;
  int horizon_offset = 1;
  std::vector<int> horizon_offsets = {1, 2, 3, 5};
  std::vector<double> cell_sweep = {0.0125, 0.025, 0.05, 0.1};
  std::vector<double> train_fractions = {0.1, 0.25, 0.5, 1.0};
  std::vector<int> runtime_ks = {1, 8, 15, 22, 29, 36, 43, 50};
  std::optional<double> max_speed_kmh;
  EvalWindow window;
  uint64_t seed = 7;
  int threads = 1;
  int rnd_trials = 3;
  double train_fraction = 0.7;
  std::optional<Region> aoi;
  bool per_cluster = false;
  double cluster_eps_km = 10.0;
  int cluster_min_pts = 3;
  int cluster_resample_n = 32;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "f1_vs_k",           "recall_vs_area",   "recall_per_km2_vs_k",
      "f1_vs_horizon",     "region_size_sweep", "rule_type_ablation",
      "masking_ablation",  "data_efficiency",   "runtime_vs_k"};
  return names;
}

inline Region data_aoi(std::span<const Trajectory> trajs, double pad_deg) {
  bool any = false;
  Region r{"aoi", {1e9, 1e9}, {-1e9, -1e9}};
  for (const auto& tr : trajs) {
    for (const auto& p : tr.points) {
      any = true;
      r.min_corner.lon = std::min(r.min_corner.lon, p.location.lon);
      r.min_corner.lat = std::min(r.min_corner.lat, p.location.lat);
      r.max_corner.lon = std::max(r.max_corner.lon, p.location.lon);
      r.max_corner.lat = std::max(r.max_corner.lat, p.location.lat);
    }
  }
  if (!any) throw std::invalid_argument("no points to bound");
  r.min_corner.lon -= pad_deg;
  r.min_corner.lat -= pad_deg;
  r.max_corner.lon += pad_deg;
  r.max_corner.lat += pad_deg;
  return r;
}

/// Deterministic split: agents sorted by id, first ceil(fraction * n) train.
inline std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_train_test(
    std::span<const Trajectory> trajs, double train_fraction) {
  std::vector<Trajectory> sorted(trajs.begin(), trajs.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.agent_id < b.agent_id; });
  size_t n_train = static_cast<size_t>(
      std::ceil(train_fraction * static_cast<double>(sorted.size())));
  n_train = std::min(n_train, sorted.size());
  std::vector<Trajectory> train(sorted.begin(), sorted.begin() + n_train);
  std::vector<Trajectory> test(sorted.begin() + n_train, sorted.end());
  return {std::move(train), std::move(test)};
}

/// Partial Fisher-Yates; the first k draws of a longer draw are themselves a
/// uniform without-replacement sample, so prefixes can be reused across k.
inline std::vector<std::string> sample_without_replacement(
    std::span<const std::string> pool, size_t k, std::mt19937_64& rng) {
  std::vector<size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  k = std::min(k, idx.size());
  std::vector<std::string> out;
  out.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
    out.push_back(pool[idx[i]]);
  }
  return out;
}

struct PreparedWorld {
  RegionGrid grid;
  std::vector<Trajectory> train, test;
  LearnedRuleSet rules;
  bool per_cluster = false;
  ClusterResult clusters;
  std::vector<LearnedRuleSet> cluster_rules;
  std::vector<std::vector<Location>> cluster_shapes;
  int resample_n = 32;

  const std::vector<Rule>& rules_for(const Trajectory& prefix) const {
    if (!per_cluster || cluster_rules.empty()) return rules.rules;
    std::vector<Location> pts;
    pts.reserve(prefix.points.size());
    for (const auto& p : prefix.points) pts.push_back(p.location);
    auto shape = resample_polyline(pts, resample_n);
    int best = -1;
    double best_d = 0;
    for (size_t c = 0; c < cluster_shapes.size(); ++c) {
      if (cluster_rules[c].rules.empty()) continue;
      double d = shape_distance_km(shape, cluster_shapes[c]);
      if (best < 0 || d < best_d) {
        best = static_cast<int>(c);
        best_d = d;
      }
    }
    return best < 0 ? rules.rules : cluster_rules[best].rules;
  }
};

inline PreparedWorld prepare_world(std::span<const Trajectory> all,
                                   const ExperimentConfig& cfg) {
  PreparedWorld w;
  auto [train, test] = split_train_test(all, cfg.train_fraction);
  w.train = std::move(train);
  w.test = std::move(test);
  Region aoi = cfg.aoi ? *cfg.aoi : data_aoi(all, cfg.cell_deg);
  w.grid = RegionGrid(aoi, cfg.cell_deg);
  candidate_regions(w.grid, w.train);
  label_regions(w.grid, w.train, cfg.features, cfg.bin_seconds);
  TimeBinning bins{0, cfg.bin_seconds};
  w.rules = learn(w.train, w.grid, bins, cfg.hop, cfg.min_support,
                  cfg.min_confidence, cfg.max_hops);

  if (cfg.per_cluster && w.train.size() >= static_cast<size_t>(cfg.cluster_min_pts)) {
    w.per_cluster = true;
    w.resample_n = cfg.cluster_resample_n;
    w.clusters = cluster_trajectories(w.train, cfg.cluster_eps_km,
                                      cfg.cluster_min_pts, cfg.cluster_resample_n);
    w.cluster_rules.resize(w.clusters.n_clusters);
    w.cluster_shapes.resize(w.clusters.n_clusters);
    for (int c = 0; c < w.clusters.n_clusters; ++c) {
      std::vector<Trajectory> members;
      for (size_t i = 0; i < w.train.size(); ++i)
        if (w.clusters.labels[i] == c) members.push_back(w.train[i]);
      w.cluster_rules[c] = learn(members, w.grid, bins, cfg.hop, cfg.min_support,
                                 cfg.min_confidence, cfg.max_hops);
      // mean shape of the members, for assigning queries to a cluster
      std::vector<Location> mean(static_cast<size_t>(cfg.cluster_resample_n), {0, 0});
      for (const auto& m : members) {
        std::vector<Location> pts;
        for (const auto& p : m.points) pts.push_back(p.location);
        auto shape = resample_polyline(pts, cfg.cluster_resample_n);
        for (size_t i = 0; i < mean.size() && i < shape.size(); ++i) {
          mean[i].lon += shape[i].lon;
          mean[i].lat += shape[i].lat;
        }
      }
      if (!members.empty()) {
        for (auto& p : mean) {
          p.lon /= static_cast<double>(members.size());
          p.lat /= static_cast<double>(members.size());
        }
      }
      w.cluster_shapes[c] = std::move(mean);
    }
  }
  return w;
}

struct SweepRow {
  std::string suite, method, param;
  int trial = 0;
  std::string agent;
  int k = 0;
  bool failed = false;
  std::string note;
  std::optional<double> precision, recall, rpk;
  double f1 = 0, area_km2 = 0, ms = 0;
};

struct AggregateRow {
  std::string suite, method, param;
  int k = 0;
  long n = 0, failures = 0;
  double precision = 0, recall = 0, f1 = 0, area_km2 = 0, rpk = 0, ms = 0;
};

struct SuiteResult {
  std::string suite;
  std::vector<SweepRow> rows;
  std::vector<AggregateRow> aggregates;
  LinearFit fit;  // runtime_vs_k: mean ms against k
};

namespace eval_detail {

struct QuerySpec {
  std::string suite, param;
  MaskStrategy strategy = MaskStrategy::mid50;
  int horizon_offset = 1;
  std::vector<int> ks;
  bool runtime_mode = false;
};

inline uint64_t param_tag(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

inline void fail_row(std::vector<SweepRow>& rows, const QuerySpec& spec,
                     const std::string& agent, const std::string& why) {
  SweepRow r;
  r.suite = spec.suite;
  r.method = "none";
  r.param = spec.param;
  r.agent = agent;
  r.failed = true;
  r.note = why;
  rows.push_back(std::move(r));
}

inline void eval_query(const PreparedWorld& world, const Trajectory& test,
                       size_t query_index, const QuerySpec& spec,
                       const ExperimentConfig& cfg, std::vector<SweepRow>& rows) {
  MaskedPair mp;
  try {
    mp = mask(test, spec.strategy, cfg.features, cfg.bin_seconds);
  } catch (const std::exception& e) {
    fail_row(rows, spec, test.agent_id, e.what());
    return;
  }
  if (mp.prefix.points.empty() || mp.suffix.points.empty()) {
    fail_row(rows, spec, test.agent_id, "degenerate mask");
    return;
  }

  TimeBinning bins{mp.prefix.points.front().timestamp, cfg.bin_seconds};
  int horizon = bins.timestep(mp.prefix.points.back().timestamp) + spec.horizon_offset;

  AbductionQuery q;
  q.agent = test.agent_id;
  q.prefix = mp.prefix;
  q.rules = world.rules_for(mp.prefix);
  q.grid = &world.grid;
  q.bins = bins;
  q.horizon = horizon;
  q.max_speed_kmh = cfg.max_speed_kmh;
  q.threads = cfg.threads;
  q.want_traces = false;

  if (spec.runtime_mode) {
    for (int k : spec.ks) {
      q.k = k;
      q.want_traces = true;
      auto t0 = std::chrono::steady_clock::now();
      Explanation ex;
      try {
        ex = abduce_top_k(q);
      } catch (const std::exception& e) {
        fail_row(rows, spec, test.agent_id, e.what());
        return;
      }
      auto t1 = std::chrono::steady_clock::now();
      SweepRow r;
      r.suite = spec.suite;
      r.method = "ABD";
      r.param = spec.param;
      r.agent = test.agent_id;
      r.k = k;
      r.ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      rows.push_back(std::move(r));
    }
    return;
  }

  std::vector<CandidateScore> scores;
  auto t0 = std::chrono::steady_clock::now();
  try {
    scores = score_candidates(q);
  } catch (const std::exception& e) {
    fail_row(rows, spec, test.agent_id, e.what());
    return;
  }
  auto t1 = std::chrono::steady_clock::now();
  double score_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  AbductionQuery q_all = q;
  q_all.k = static_cast<int>(scores.size());
  Explanation full = assemble_top_k(scores, q_all);
  std::vector<std::string> ranked;
  ranked.reserve(full.regions.size());
  for (const auto& r : full.regions) ranked.push_back(r.region_id);

  auto truth = window_points(mp.suffix, bins, cfg.window, horizon);
  std::vector<std::string> pool = abduce_detail::candidate_pool(q);

  auto emit = [&](const std::string& method, int trial, int k,
                  std::span<const std::string> ids) {
    SweepRow r;
    r.suite = spec.suite;
    r.method = method;
    r.param = spec.param;
    r.trial = trial;
    r.agent = test.agent_id;
    r.k = k;
    r.ms = method == "ABD" ? score_ms : 0.0;
    if (ids.empty()) {
      r.failed = true;
      r.note = "no candidates";
      rows.push_back(std::move(r));
      return;
    }
    r.precision = precision_at_k(ids, truth, world.grid);
    r.recall = recall_at_k(ids, truth, world.grid);
    if (!r.precision || !r.recall) {
      r.failed = true;
      r.note = "no ground truth in window";
      rows.push_back(std::move(r));
      return;
    }
    r.f1 = f1_score(*r.precision, *r.recall);
    r.area_km2 = area_km2_of(ids, world.grid);
    r.rpk = recall_per_km2(r.recall, r.area_km2);
    rows.push_back(std::move(r));
  };

  for (int k : spec.ks) {
    size_t kk = std::min<size_t>(static_cast<size_t>(std::max(0, k)), ranked.size());
    emit("ABD", 0, k, std::span<const std::string>(ranked.data(), kk));
  }

  int kmax = spec.ks.empty() ? 0 : *std::max_element(spec.ks.begin(), spec.ks.end());
  for (int trial = 0; trial < cfg.rnd_trials; ++trial) {
    std::mt19937_64 rng(mix_seed(cfg.seed, param_tag(spec.suite + "/" + spec.param),
                                 query_index, static_cast<uint64_t>(trial)));
    auto sampled = sample_without_replacement(pool, static_cast<size_t>(kmax), rng);
    for (int k : spec.ks) {
      size_t kk = std::min<size_t>(static_cast<size_t>(std::max(0, k)), sampled.size());
      emit("RND", trial, k, std::span<const std::string>(sampled.data(), kk));
    }
  }
}

inline void run_spec(const PreparedWorld& world, const QuerySpec& spec,
                     const ExperimentConfig& cfg, std::vector<SweepRow>& rows) {
  for (size_t i = 0; i < world.test.size(); ++i)
    eval_query(world, world.test[i], i, spec, cfg, rows);
}

}  // namespace eval_detail

inline std::vector<AggregateRow> aggregate_rows(const std::vector<SweepRow>& rows) {
  struct Acc {
    long n = 0;
    double p = 0, r = 0, f1 = 0, area = 0, rpk = 0, ms = 0;
    long rpk_n = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string, int>, Acc> acc;
  std::map<std::pair<std::string, std::string>, long> failures;  // (suite, param)
  for (const auto& row : rows) {
    if (row.failed) {
      ++failures[{row.suite, row.param}];
      continue;
    }
    auto& a = acc[{row.suite, row.method, row.param, row.k}];
    ++a.n;
    a.p += row.precision.value_or(0);
    a.r += row.recall.value_or(0);
    a.f1 += row.f1;
    a.area += row.area_km2;
    a.ms += row.ms;
    if (row.rpk) {
      a.rpk += *row.rpk;
      ++a.rpk_n;
    }
  }
  std::vector<AggregateRow> out;
  out.reserve(acc.size());
  for (const auto& [key, a] : acc) {
    AggregateRow g;
    std::tie(g.suite, g.method, g.param, g.k) = key;
    g.n = a.n;
    auto it = failures.find({g.suite, g.param});
    g.failures = it == failures.end() ? 0 : it->second;
    if (a.n > 0) {
      g.precision = a.p / a.n;
      g.recall = a.r / a.n;
      g.f1 = a.f1 / a.n;
      g.area_km2 = a.area / a.n;
      g.ms = a.ms / a.n;
    }
    g.rpk = a.rpk_n > 0 ? a.rpk / a.rpk_n : 0.0;
    out.push_back(std::move(g));
  }
  return out;
}

inline SuiteResult run_suite(const std::string& suite,
                             std::span<const Trajectory> data,
                             const ExperimentConfig& cfg) {
  using eval_detail::QuerySpec;
  SuiteResult res;
  res.suite = suite;

  auto shared_sweep = [&](const ExperimentConfig& c) {
    PreparedWorld world = prepare_world(data, c);
    QuerySpec spec{suite, "-", c.mask_strategy, c.horizon_offset, c.ks, false};
    eval_detail::run_spec(world, spec, c, res.rows);
  };

  if (suite == "f1_vs_k" || suite == "recall_vs_area" ||
      suite == "recall_per_km2_vs_k") {
    shared_sweep(cfg);
  } else if (suite == "f1_vs_horizon") {
    PreparedWorld world = prepare_world(data, cfg);
    for (int off : cfg.horizon_offsets) {
      QuerySpec spec{suite, std::to_string(off), cfg.mask_strategy, off,
                     {cfg.k}, false};
      eval_detail::run_spec(world, spec, cfg, res.rows);
    }
  } else if (suite == "region_size_sweep") {
    for (double cell : cfg.cell_sweep) {
      ExperimentConfig c = cfg;
      c.cell_deg = cell;
      PreparedWorld world = prepare_world(data, c);
      QuerySpec spec{suite, format_double(cell), c.mask_strategy,
                     c.horizon_offset, {c.k}, false};
      eval_detail::run_spec(world, spec, c, res.rows);
    }
  } else if (suite == "rule_type_ablation") {
    for (Hop hop : {Hop::single, Hop::multi}) {
      ExperimentConfig c = cfg;
      c.hop = hop;
      PreparedWorld world = prepare_world(data, c);
      QuerySpec spec{suite, to_string(hop), c.mask_strategy, c.horizon_offset,
                     {c.k}, false};
      eval_detail::run_spec(world, spec, c, res.rows);
    }
  } else if (suite == "masking_ablation") {
    PreparedWorld world = prepare_world(data, cfg);
    for (MaskStrategy s :
         {MaskStrategy::mid50, MaskStrategy::ais_off, MaskStrategy::stay}) {
      QuerySpec spec{suite, to_string(s), s, cfg.horizon_offset, {cfg.k}, false};
      eval_detail::run_spec(world, spec, cfg, res.rows);
    }
  } else if (suite == "data_efficiency") {
    for (double frac : cfg.train_fractions) {
      ExperimentConfig c = cfg;
      c.train_fraction = cfg.train_fraction * frac;
      PreparedWorld world = prepare_world(data, c);
      QuerySpec spec{suite, format_double(frac), c.mask_strategy,
                     c.horizon_offset, {c.k}, false};
      eval_detail::run_spec(world, spec, c, res.rows);
    }
  } else if (suite == "runtime_vs_k") {
    PreparedWorld world = prepare_world(data, cfg);
    QuerySpec spec{suite, "-", cfg.mask_strategy, cfg.horizon_offset,
                   cfg.runtime_ks, true};
    eval_detail::run_spec(world, spec, cfg, res.rows);
  } else {
    throw std::invalid_argument("unknown suite: " + suite);
  }

  res.aggregates = aggregate_rows(res.rows);
  if (suite == "runtime_vs_k") {
    std::vector<double> xs, ys;
    for (const auto& g : res.aggregates) {
      if (g.method != "ABD") continue;
      xs.push_back(static_cast<double>(g.k));
      ys.push_back(g.ms);
    }
    res.fit = fit_line(xs, ys);
  }
  return res;
}

inline void write_config_comments(std::ostream& out, const ExperimentConfig& cfg,
                                  const std::string& suite) {
  auto kv = [&](const std::string& k, const std::string& v) {
    out << "# " << k << "=" << v << "\n";
  };
  kv("suite", suite);
  kv("cell_deg", format_double(cfg.cell_deg));
  kv("bin_seconds", std::to_string(cfg.bin_seconds));
  kv("hop", to_string(cfg.hop));
  kv("min_support", std::to_string(cfg.min_support));
  kv("min_confidence", format_double(cfg.min_confidence));
  kv("max_hops", std::to_string(cfg.max_hops));
  kv("mask", to_string(cfg.mask_strategy));
  kv("k", std::to_string(cfg.k));
  kv("horizon_offset", std::to_string(cfg.horizon_offset));
  kv("window", cfg.window.mode == EvalWindow::Mode::at_horizon ? "at_horizon"
                                                               : "full_suffix");
  kv("window_width", std::to_string(cfg.window.width));
  kv("max_speed_kmh",
     cfg.max_speed_kmh ? format_double(*cfg.max_speed_kmh) : "none");
  kv("seed", std::to_string(cfg.seed));
  kv("threads", std::to_string(cfg.threads));
  kv("rnd_trials", std::to_string(cfg.rnd_trials));
  kv("train_fraction", format_double(cfg.train_fraction));
  kv("per_cluster", cfg.per_cluster ? "1" : "0");
  kv("port_radius_km", format_double(cfg.features.port_radius_km));
  kv("hotspot_quantile", format_double(cfg.features.hotspot_quantile));
  kv("speed_sigma", format_double(cfg.features.speed_sigma));
  kv("course_change_deg", format_double(cfg.features.course_change_deg));
  kv("stay_radius_km", format_double(cfg.features.stay_radius_km));
  kv("stay_min_duration", std::to_string(cfg.features.stay_min_duration));
  kv("ais_gap_seconds", format_double(cfg.features.ais_gap_seconds));
  kv("draught_delta_m", format_double(cfg.features.draught_delta_m));
}

inline std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

inline void write_suite_csvs(const std::string& out_dir, const SuiteResult& res,
                             const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::ofstream pq(fs::path(out_dir) / (res.suite + "_per_query.csv"));
  write_config_comments(pq, cfg, res.suite);
  pq << "suite,method,param,trial,agent,k,failed,precision,recall,f1,area_km2,"
        "recall_per_km2,ms,note\n";
  for (const auto& r : res.rows) {
    pq << r.suite << ',' << r.method << ',' << r.param << ',' << r.trial << ','
       << r.agent << ',' << r.k << ',' << (r.failed ? 1 : 0) << ','
       << opt_str(r.precision) << ',' << opt_str(r.recall) << ','
       << format_double(r.f1) << ',' << format_double(r.area_km2) << ','
       << opt_str(r.rpk) << ',' << format_double(r.ms) << ',' << r.note << "\n";
  }

  std::ofstream ag(fs::path(out_dir) / (res.suite + "_aggregate.csv"));
  write_config_comments(ag, cfg, res.suite);
  if (res.suite == "runtime_vs_k") {
    ag << "# fit_slope_ms_per_k=" << format_double(res.fit.slope) << "\n";
    ag << "# fit_intercept_ms=" << format_double(res.fit.intercept) << "\n";
    ag << "# fit_r2=" << format_double(res.fit.r2) << "\n";
  }
  ag << "suite,method,param,k,n,failures,precision,recall,f1,area_km2,"
        "recall_per_km2,ms\n";
  for (const auto& g : res.aggregates) {
    ag << g.suite << ',' << g.method << ',' << g.param << ',' << g.k << ','
       << g.n << ',' << g.failures << ',' << format_double(g.precision) << ','
       << format_double(g.recall) << ',' << format_double(g.f1) << ','
       << format_double(g.area_km2) << ',' << format_double(g.rpk) << ','
       << format_double(g.ms) << "\n";
  }
}

inline std::vector<SuiteResult> run_all_suites(std::span<const Trajectory> data,
                                               const ExperimentConfig& cfg,
                                               const std::string& out_dir) {
  std::vector<SuiteResult> out;
  for (const auto& name : suite_names()) {
    out.push_back(run_suite(name, data, cfg));
    write_suite_csvs(out_dir, out.back(), cfg);
  }
  return out;
}

}  // namespace marlin
