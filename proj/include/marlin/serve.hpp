#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "marlin/abduce.hpp"
#include "marlin/learner.hpp"
#include "marlin/trajectory_csv.hpp"

namespace marlin {

struct ServeConfig {
  std::vector<Rule> rules;
  const RegionGrid* grid = nullptr;
  int64_t bin_seconds = 3600;
  int k = 10;
  int horizon_offset = 1;
  double ais_gap_seconds = 3600.0;
  std::optional<double> max_speed_kmh;
  int threads = 1;
  long relearn_every = 0;  // records between re-learning passes; 0 = never
  Hop hop = Hop::single;
  long min_support = 2;
  double min_confidence = 0.05;
  int max_hops = 0;
  bool comments = true;  // informational `#` lines in the output
};

struct ServeStats {
  long accepted = 0, malformed = 0, emissions = 0, skipped = 0, relearns = 0;
};

/// Newline-framed feed of `agent timestamp lon lat [sog cog heading draught]`
/// records (timestamp ISO-8601 or epoch seconds). Clock time is data-driven:
/// "now" is the largest timestamp seen. When an agent's silence exceeds the
/// AIS gap it is declared dark — once per silence — and a top-k explanation
/// is emitted for it, one line per region:
///
///   agent,horizon,rank,region_id,min_lon,min_lat,max_lon,max_lat,score,labels,fired_rules
///
/// The horizon is the agent's last-report timestep plus the configured
/// offset, in bins anchored at the agent's first report — exactly the batch
/// query for that prefix, so a replay matches batch abduction.
inline ServeStats serve_stream(std::istream& in, std::ostream& out, ServeConfig cfg) {
  if (!cfg.grid) throw std::invalid_argument("serve needs a labeled grid");
  ServeStats stats;
  struct AgentState {
    Trajectory traj;
    bool dark = false;
  };
  std::map<std::string, AgentState> agents;  // ordered -> deterministic scans
  int64_t now = 0;
  bool have_now = false;
  std::vector<Rule> rules = cfg.rules;

  auto emit_for = [&](const std::string& id, AgentState& st) {
    st.dark = true;
    AbductionQuery q;
    q.agent = id;
    q.prefix = st.traj;
    q.rules = rules;
    q.grid = cfg.grid;
    q.bins = TimeBinning{st.traj.points.front().timestamp, cfg.bin_seconds};
    q.horizon = q.bins.timestep(st.traj.points.back().timestamp) + cfg.horizon_offset;
    q.k = cfg.k;
    q.max_speed_kmh = cfg.max_speed_kmh;
    q.threads = cfg.threads;
    q.want_traces = true;
    try {
      Explanation ex = abduce_top_k(q);
      if (ex.regions.empty()) {
        ++stats.skipped;
        if (cfg.comments) out << "# skip agent=" << id << " reason=no-candidates\n";
      } else {
        for (size_t i = 0; i < ex.regions.size(); ++i)
          out << id << ',' << q.horizon << ','
              << explanation_row(ex.regions[i], i + 1, *cfg.grid) << "\n";
        ++stats.emissions;
      }
    } catch (const std::exception& e) {
      ++stats.skipped;
      if (cfg.comments) out << "# skip agent=" << id << " reason=" << e.what() << "\n";
    }
    out.flush();
  };

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;

    std::istringstream ls(line);
    std::string agent, ts_text;
    double lon, lat;
    if (!(ls >> agent >> ts_text >> lon >> lat)) {
      ++stats.malformed;
      continue;
    }
    auto ts = parse_timestamp(ts_text);
    if (!ts) {
      ++stats.malformed;
      continue;
    }
    TrajectoryPoint p;
    p.timestamp = *ts;
    p.location = {lon, lat};
    double v;
    if (ls >> v) p.sog = v;
    if (ls >> v) p.cog = v;
    if (ls >> v) p.heading = v;
    if (ls >> v) p.draught = v;

    auto& st = agents[agent];
    if (!st.traj.points.empty() && p.timestamp <= st.traj.points.back().timestamp) {
      ++stats.malformed;  // stale or duplicate report
      continue;
    }

    int64_t candidate_now = have_now ? std::max(now, p.timestamp) : p.timestamp;
    for (auto& [id, other] : agents) {
      if (other.dark || other.traj.points.empty()) continue;
      double silence = static_cast<double>(candidate_now -
                                           other.traj.points.back().timestamp);
      if (silence > cfg.ais_gap_seconds) emit_for(id, other);
    }

    st.traj.agent_id = agent;
    st.traj.points.push_back(p);
    st.dark = false;
    now = candidate_now;
    have_now = true;
    ++stats.accepted;

    if (cfg.relearn_every > 0 && stats.accepted % cfg.relearn_every == 0) {
      std::vector<Trajectory> corpus;
      corpus.reserve(agents.size());
      for (const auto& [_, a] : agents) corpus.push_back(a.traj);
      TimeBinning bins{0, cfg.bin_seconds};
      auto learned = learn(corpus, *cfg.grid, bins, cfg.hop, cfg.min_support,
                           cfg.min_confidence, cfg.max_hops);
      rules = learned.rules;
      ++stats.relearns;
      if (cfg.comments)
        out << "# relearned rules=" << rules.size() << " at=" << stats.accepted
            << "\n";
      out.flush();
    }
  }
  return stats;
}

}  // namespace marlin
