// marlin: locate dark maritime vessels by abductive inference over an
// annotated temporal logic program.
//
// Subcommands: learn, abduce, eval, synth, serve. Exit codes: 0 success,
// 1 invalid input or arguments, 2 internal error.

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <streambuf>

#include <CLI11.hpp>

#include "marlin/marlin.hpp"

namespace {

using namespace marlin;

Region parse_aoi_arg(const std::string& s) {
  auto f = csv_detail::split_csv(s);
  if (f.size() != 4) throw std::invalid_argument("--aoi needs min_lon,min_lat,max_lon,max_lat");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    auto n = csv_detail::parse_num(f[i]);
    if (!n) throw std::invalid_argument("--aoi: bad number " + f[i]);
    v[i] = *n;
  }
  return Region{"aoi", {v[0], v[1]}, {v[2], v[3]}};
}

std::vector<Location> read_ports_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ports file: " + path);
  std::vector<Location> ports;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto f = csv_detail::split_csv(line);
    // header row or `name,lon,lat` rows; plain `lon,lat` works too
    size_t off = f.size() >= 3 ? f.size() - 2 : 0;
    auto lon = f.size() >= 2 ? csv_detail::parse_num(f[off]) : std::nullopt;
    auto lat = f.size() >= 2 ? csv_detail::parse_num(f[off + 1]) : std::nullopt;
    if (!lon || !lat) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw std::runtime_error("ports file: bad row: " + line);
    }
    first = false;
    ports.push_back({*lon, *lat});
  }
  return ports;
}

void add_feature_options(CLI::App* app, FeatureConfig& f, std::string& ports_file) {
  app->add_option("--ports", ports_file, "ports CSV (name,lon,lat)");
  app->add_option("--port-radius", f.port_radius_km, "nearport radius, km");
  app->add_option("--hotspot-quantile", f.hotspot_quantile,
                  "visit-count quantile for the hotspot label");
  app->add_option("--speed-sigma", f.speed_sigma, "std devs for speed labels");
  app->add_option("--course-change", f.course_change_deg,
                  "course change threshold, degrees");
  app->add_option("--stay-radius", f.stay_radius_km, "dwell radius, km");
  app->add_option("--stay-min-duration", f.stay_min_duration,
                  "dwell duration, timesteps");
  app->add_option("--ais-gap", f.ais_gap_seconds, "reporting gap, seconds");
  app->add_option("--draught-delta", f.draught_delta_m,
                  "draught change threshold, metres");
}

Hop parse_hop(const std::string& s) {
  if (s == "single") return Hop::single;
  if (s == "multi") return Hop::multi;
  throw std::invalid_argument("--hop must be single or multi");
}

MaskStrategy parse_mask(const std::string& s) {
  if (s == "mid50") return MaskStrategy::mid50;
  if (s == "ais_off") return MaskStrategy::ais_off;
  if (s == "stay") return MaskStrategy::stay;
  throw std::invalid_argument("--mask must be mid50, ais_off or stay");
}

// ---------------------------------------------------------------------------

int cmd_learn(const std::string& in_path, const std::string& grid_out,
              const std::string& rules_out, const std::string& prov_out,
              double cell, int64_t bin, const std::string& hop_s, long min_support,
              double min_conf, int max_hops, const std::string& aoi_s,
              FeatureConfig features, const std::string& ports_file) {
  if (!ports_file.empty()) features.ports = read_ports_csv(ports_file);
  IngestReport rep;
  auto trajs = read_trajectories_file(in_path, &rep);
  if (trajs.empty()) throw std::runtime_error("no usable trajectories in " + in_path);

  Region aoi = aoi_s.empty() ? data_aoi(trajs, cell) : parse_aoi_arg(aoi_s);
  RegionGrid grid(aoi, cell);
  candidate_regions(grid, trajs);
  label_regions(grid, trajs, features, bin);

  TimeBinning bins{0, bin};
  auto rules = learn(trajs, grid, bins, parse_hop(hop_s), min_support, min_conf,
                     max_hops);

  write_grid_file(grid_out, grid);
  {
    std::ofstream out(rules_out);
    if (!out) throw std::runtime_error("cannot write rules file: " + rules_out);
    write_rules(out, rules.rules);
  }
  if (!prov_out.empty()) {
    std::ofstream out(prov_out);
    if (!out) throw std::runtime_error("cannot write provenance file: " + prov_out);
    write_provenance_csv(out, rules);
  }
  std::cerr << "learn: " << trajs.size() << " trajectories, " << rep.rows_read
            << " rows (" << rep.malformed << " malformed, " << rep.duplicates
            << " duplicate), " << grid.candidate_ids.size() << " candidate cells, "
            << rules.rules.size() << " rules (" << rules.clamped << " clamped)\n";
  return 0;
}

int cmd_abduce(const std::string& prefix_path, const std::string& grid_path,
               const std::string& rules_path, const std::string& out_path,
               std::string agent, int k, int horizon, int horizon_offset,
               int64_t bin, double max_speed, int threads, bool keep_inconsistent) {
  RegionGrid grid = read_grid_file(grid_path);
  ParsedProgram behav = parse_rules_file(rules_path);
  auto trajs = read_trajectories_file(prefix_path);
  if (trajs.empty()) throw std::runtime_error("no usable prefix rows in " + prefix_path);

  const Trajectory* prefix = nullptr;
  if (agent.empty()) {
    if (trajs.size() != 1)
      throw std::runtime_error("prefix file has several agents; pass --agent");
    prefix = &trajs[0];
  } else {
    for (const auto& tr : trajs)
      if (tr.agent_id == agent) prefix = &tr;
    if (!prefix) throw std::runtime_error("agent not in prefix file: " + agent);
  }

  AbductionQuery q;
  q.agent = prefix->agent_id;
  q.prefix = *prefix;
  q.rules = behav.rules;
  q.extra_facts = behav.facts;
  q.grid = &grid;
  q.bins = TimeBinning{prefix->points.front().timestamp, bin};
  q.horizon = horizon >= 0
                  ? horizon
                  : q.bins.timestep(prefix->points.back().timestamp) + horizon_offset;
  q.k = k;
  if (max_speed > 0) q.max_speed_kmh = max_speed;
  q.threads = threads;
  q.inconsistent_scores_zero = keep_inconsistent;

  Explanation ex = abduce_top_k(q);
  if (out_path.empty() || out_path == "-") {
    write_explanation_csv(std::cout, ex, grid);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write: " + out_path);
    write_explanation_csv(out, ex, grid);
  }
  std::cerr << "abduce: horizon " << ex.horizon << ", " << ex.candidates_scored
            << " candidates scored, " << ex.discarded_inconsistent
            << " inconsistent discarded, " << ex.regions.size() << " returned\n";
  return 0;
}

int cmd_synth(const std::string& world_path, const std::string& out_path,
              int vessels, int points, int64_t bin, uint64_t seed_override,
              bool seed_given) {
  SynthWorld world = parse_world_file(world_path);
  if (seed_given) world.seed = seed_override;
  auto trajs = generate(world, vessels, points, bin);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write: " + out_path);
  write_trajectories_csv(out, trajs);
  size_t n_pts = 0;
  for (const auto& t : trajs) n_pts += t.points.size();
  std::cerr << "synth: " << trajs.size() << " vessels, " << n_pts << " points\n";
  return 0;
}

int cmd_eval(const std::string& in_path, const std::string& out_dir,
             const std::string& suite, ExperimentConfig cfg,
             const std::string& aoi_s, const std::string& ports_file,
             const std::string& hop_s, const std::string& mask_s,
             const std::string& window_s) {
  if (!ports_file.empty()) cfg.features.ports = read_ports_csv(ports_file);
  if (!aoi_s.empty()) cfg.aoi = parse_aoi_arg(aoi_s);
  cfg.hop = parse_hop(hop_s);
  cfg.mask_strategy = parse_mask(mask_s);
  if (window_s == "at_horizon")
    cfg.window.mode = EvalWindow::Mode::at_horizon;
  else if (window_s == "full_suffix")
    cfg.window.mode = EvalWindow::Mode::full_suffix;
  else
    throw std::invalid_argument("--window must be at_horizon or full_suffix");

  auto trajs = read_trajectories_file(in_path);
  if (trajs.empty()) throw std::runtime_error("no usable trajectories in " + in_path);

  std::vector<std::string> suites;
  if (suite == "all")
    suites = suite_names();
  else
    suites.push_back(suite);
  for (const auto& name : suites) {
    SuiteResult res = run_suite(name, trajs, cfg);
    write_suite_csvs(out_dir, res, cfg);
    long failures = 0;
    for (const auto& r : res.rows)
      if (r.failed) ++failures;
    std::cerr << "eval " << name << ": " << res.rows.size() << " rows, "
              << failures << " failed";
    if (name == "runtime_vs_k")
      std::cerr << ", fit slope " << format_double(res.fit.slope)
                << " ms/k (r2 " << format_double(res.fit.r2) << ")";
    std::cerr << "\n";
  }
  return 0;
}

// Minimal blocking line server: one client at a time, the whole connection is
// one newline-framed session.
class FdStreamBuf : public std::streambuf {
 public:
  explicit FdStreamBuf(int fd) : fd_(fd) { setg(buf_, buf_, buf_); }

 protected:
  int underflow() override {
    ssize_t n = ::read(fd_, buf_, sizeof(buf_));
    if (n <= 0) return traits_type::eof();
    setg(buf_, buf_, buf_ + n);
    return traits_type::to_int_type(buf_[0]);
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    ssize_t w = ::write(fd_, s, static_cast<size_t>(n));
    return w < 0 ? 0 : w;
  }
  int overflow(int c) override {
    if (c == traits_type::eof()) return c;
    char ch = static_cast<char>(c);
    return ::write(fd_, &ch, 1) == 1 ? c : traits_type::eof();
  }

 private:
  int fd_;
  char buf_[4096];
};

int cmd_serve(const std::string& grid_path, const std::string& rules_path,
              int listen_port, ServeConfig cfg, const std::string& hop_s) {
  RegionGrid grid = read_grid_file(grid_path);
  ParsedProgram behav = parse_rules_file(rules_path);
  cfg.rules = behav.rules;
  cfg.grid = &grid;
  cfg.hop = parse_hop(hop_s);

  if (listen_port <= 0) {
    ServeStats st = serve_stream(std::cin, std::cout, cfg);
    std::cerr << "serve: " << st.accepted << " records (" << st.malformed
              << " malformed), " << st.emissions << " emissions, " << st.skipped
              << " skipped, " << st.relearns << " relearns\n";
    return 0;
  }

  int sock = ::socket(AF_INET, SOCK_STREAM, 0);
  if (sock < 0) throw std::runtime_error("socket: " + std::string(strerror(errno)));
  int one = 1;
  ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(listen_port));
  if (::bind(sock, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(sock);
    throw std::runtime_error("bind: " + std::string(strerror(errno)));
  }
  if (::listen(sock, 1) < 0) {
    ::close(sock);
    throw std::runtime_error("listen: " + std::string(strerror(errno)));
  }
  std::cerr << "serve: listening on 127.0.0.1:" << listen_port << "\n";
  while (true) {
    int client = ::accept(sock, nullptr, nullptr);
    if (client < 0) break;
    FdStreamBuf buf(client);
    std::istream cin_fd(&buf);
    std::ostream cout_fd(&buf);
    ServeStats st = serve_stream(cin_fd, cout_fd, cfg);
    std::cerr << "serve: session closed, " << st.accepted << " records, "
              << st.emissions << " emissions\n";
    ::close(client);
  }
  ::close(sock);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dark-vessel location by abductive temporal inference"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags win");

  // learn ---------------------------------------------------------------
  auto* learn_cmd = app.add_subcommand("learn", "learn behavioral rules from a trajectory CSV");
  std::string l_in, l_grid = "grid.csv", l_rules = "rules.txt", l_prov, l_aoi, l_ports;
  std::string l_hop = "single";
  double l_cell = 0.025;
  int64_t l_bin = 3600;
  long l_support = 2;
  double l_conf = 0.05;
  int l_max_hops = 0;
  FeatureConfig l_features;
  learn_cmd->add_option("--in", l_in, "trajectory CSV")->required();
  learn_cmd->add_option("--grid-out", l_grid, "labeled grid CSV to write");
  learn_cmd->add_option("--rules-out", l_rules, "rules file to write");
  learn_cmd->add_option("--provenance-out", l_prov, "per-rule counts CSV");
  learn_cmd->add_option("--cell", l_cell, "grid cell size, degrees");
  learn_cmd->add_option("--bin", l_bin, "timestep bin, seconds");
  learn_cmd->add_option("--hop", l_hop, "single or multi");
  learn_cmd->add_option("--min-support", l_support, "minimum pair count");
  learn_cmd->add_option("--min-confidence", l_conf, "minimum rule confidence");
  learn_cmd->add_option("--max-hops", l_max_hops, "cap multi-hop distance (0 = unbounded)");
  learn_cmd->add_option("--aoi", l_aoi, "min_lon,min_lat,max_lon,max_lat (default: data bounds)");
  add_feature_options(learn_cmd, l_features, l_ports);

  // abduce --------------------------------------------------------------
  auto* abd_cmd = app.add_subcommand("abduce", "top-k candidate regions for a dark vessel");
  std::string a_prefix, a_grid, a_rules, a_out, a_agent;
  int a_k = 10, a_horizon = -1, a_offset = 1, a_threads = 1;
  int64_t a_bin = 3600;
  double a_max_speed = 0;
  bool a_keep_inconsistent = false;
  abd_cmd->add_option("--prefix", a_prefix, "observed prefix CSV")->required();
  abd_cmd->add_option("--grid", a_grid, "labeled grid CSV")->required();
  abd_cmd->add_option("--rules", a_rules, "rules file")->required();
  abd_cmd->add_option("--out", a_out, "explanation CSV (default stdout)");
  abd_cmd->add_option("--agent", a_agent, "agent id (default: sole agent in prefix)");
  abd_cmd->add_option("--k", a_k, "regions to return");
  abd_cmd->add_option("--horizon", a_horizon, "absolute horizon timestep");
  abd_cmd->add_option("--horizon-offset", a_offset, "steps past the prefix end");
  abd_cmd->add_option("--bin", a_bin, "timestep bin, seconds");
  abd_cmd->add_option("--max-speed", a_max_speed, "feasibility filter, km/h (0 = off)");
  abd_cmd->add_option("--threads", a_threads, "worker threads");
  abd_cmd->add_flag("--score-inconsistent-as-zero", a_keep_inconsistent,
                    "keep inconsistent hypotheses at score 0 instead of dropping");

  // eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "run evaluation suites");
  std::string e_in, e_dir = "eval_out", e_suite = "all", e_aoi, e_ports;
  std::string e_hop = "single", e_mask = "mid50", e_window = "at_horizon";
  ExperimentConfig e_cfg;
  double e_max_speed = 0;
  eval_cmd->add_option("--in", e_in, "trajectory CSV")->required();
  eval_cmd->add_option("--out-dir", e_dir, "directory for result CSVs");
  eval_cmd->add_option("--suite", e_suite,
                       "suite name or `all` (f1_vs_k, recall_vs_area, "
                       "recall_per_km2_vs_k, f1_vs_horizon, region_size_sweep, "
                       "rule_type_ablation, masking_ablation, data_efficiency, "
                       "runtime_vs_k)");
  eval_cmd->add_option("--cell", e_cfg.cell_deg, "grid cell size, degrees");
  eval_cmd->add_option("--bin", e_cfg.bin_seconds, "timestep bin, seconds");
  eval_cmd->add_option("--hop", e_hop, "single or multi");
  eval_cmd->add_option("--min-support", e_cfg.min_support, "minimum pair count");
  eval_cmd->add_option("--min-confidence", e_cfg.min_confidence, "minimum confidence");
  eval_cmd->add_option("--max-hops", e_cfg.max_hops, "cap multi-hop distance");
  eval_cmd->add_option("--mask", e_mask, "mid50, ais_off or stay");
  eval_cmd->add_option("--k", e_cfg.k, "k for fixed-k suites");
  eval_cmd->add_option("--ks", e_cfg.ks, "k sweep values");
  eval_cmd->add_option("--horizon-offset", e_cfg.horizon_offset, "steps past prefix end");
  eval_cmd->add_option("--window", e_window, "at_horizon or full_suffix");
  eval_cmd->add_option("--window-width", e_cfg.window.width, "bins around the horizon");
  eval_cmd->add_option("--max-speed", e_max_speed, "feasibility filter, km/h (0 = off)");
  eval_cmd->add_option("--seed", e_cfg.seed, "experiment seed");
  eval_cmd->add_option("--threads", e_cfg.threads, "worker threads");
  eval_cmd->add_option("--rnd-trials", e_cfg.rnd_trials, "random baseline trials");
  eval_cmd->add_option("--train-fraction", e_cfg.train_fraction, "train split fraction");
  eval_cmd->add_option("--aoi", e_aoi, "min_lon,min_lat,max_lon,max_lat");
  eval_cmd->add_flag("--per-cluster", e_cfg.per_cluster, "learn rules per trajectory cluster");
  eval_cmd->add_option("--cluster-eps", e_cfg.cluster_eps_km, "cluster shape distance, km");
  eval_cmd->add_option("--cluster-min-pts", e_cfg.cluster_min_pts, "cluster density threshold");
  add_feature_options(eval_cmd, e_cfg.features, e_ports);

  // synth ---------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic trajectory corpus");
  std::string s_world, s_out = "synth.csv";
  int s_vessels = 100, s_points = 100;
  int64_t s_bin = 3600;
  uint64_t s_seed = 0;
  synth_cmd->add_option("--world", s_world, "world config file")->required();
  synth_cmd->add_option("--out", s_out, "trajectory CSV to write");
  synth_cmd->add_option("--vessels", s_vessels, "number of vessels");
  synth_cmd->add_option("--points", s_points, "steps per vessel");
  synth_cmd->add_option("--bin", s_bin, "seconds between reports");
  auto* seed_opt = synth_cmd->add_option("--seed", s_seed, "override the world seed");

  // serve ---------------------------------------------------------------
  auto* serve_cmd = app.add_subcommand("serve", "watch a live feed and explain dark vessels");
  std::string v_grid, v_rules, v_hop = "single";
  int v_port = 0;
  ServeConfig v_cfg;
  double v_max_speed = 0;
  serve_cmd->add_option("--grid", v_grid, "labeled grid CSV")->required();
  serve_cmd->add_option("--rules", v_rules, "rules file")->required();
  serve_cmd->add_option("--listen", v_port, "TCP port on localhost (default: stdin)");
  serve_cmd->add_option("--k", v_cfg.k, "regions per emission");
  serve_cmd->add_option("--bin", v_cfg.bin_seconds, "timestep bin, seconds");
  serve_cmd->add_option("--horizon-offset", v_cfg.horizon_offset, "steps past last report");
  serve_cmd->add_option("--ais-gap", v_cfg.ais_gap_seconds, "silence that counts as dark, seconds");
  serve_cmd->add_option("--max-speed", v_max_speed, "feasibility filter, km/h (0 = off)");
  serve_cmd->add_option("--threads", v_cfg.threads, "worker threads");
  serve_cmd->add_option("--relearn-every", v_cfg.relearn_every,
                        "re-learn rules every N records (0 = never)");
  serve_cmd->add_option("--hop", v_hop, "hop mode for re-learning");
  serve_cmd->add_option("--min-support", v_cfg.min_support, "re-learn support");
  serve_cmd->add_option("--min-confidence", v_cfg.min_confidence, "re-learn confidence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (learn_cmd->parsed())
      return cmd_learn(l_in, l_grid, l_rules, l_prov, l_cell, l_bin, l_hop,
                       l_support, l_conf, l_max_hops, l_aoi, l_features, l_ports);
    if (abd_cmd->parsed())
      return cmd_abduce(a_prefix, a_grid, a_rules, a_out, a_agent, a_k, a_horizon,
                        a_offset, a_bin, a_max_speed, a_threads,
                        a_keep_inconsistent);
    if (eval_cmd->parsed()) {
      if (e_max_speed > 0) e_cfg.max_speed_kmh = e_max_speed;
      return cmd_eval(e_in, e_dir, e_suite, e_cfg, e_aoi, e_ports, e_hop, e_mask,
                      e_window);
    }
    if (synth_cmd->parsed())
      return cmd_synth(s_world, s_out, s_vessels, s_points, s_bin, s_seed,
                       seed_opt->count() > 0);
    if (serve_cmd->parsed()) {
      if (v_max_speed > 0) v_cfg.max_speed_kmh = v_max_speed;
      return cmd_serve(v_grid, v_rules, v_port, v_cfg, v_hop);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
