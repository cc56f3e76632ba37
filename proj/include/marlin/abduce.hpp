#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlin/features.hpp"
#include "marlin/fixpoint.hpp"
#include "marlin/geo.hpp"
#include "marlin/logic.hpp"
#include "marlin/parallel.hpp"
#include "marlin/trajectory.hpp"

namespace marlin {

/// Observed evidence as a program: one certain at-fact per occupied prefix
/// timestep, plus the feature labels of every labeled cell asserted at every
/// timestep up to the horizon (labels are static geography over the window).
inline Program build_init_program(const std::string& agent, const Trajectory& prefix,
                                  const RegionGrid& grid, const TimeBinning& bins,
                                  int horizon) {
  Program p;
  auto seq = to_region_sequence(prefix, grid, bins);
  for (const auto& [t, rid] : seq.entries)
    if (t >= 0) p.add_fact({GroundAtom::at(agent, rid), {1.0, 1.0}, t});
  for (const auto& [rid, labels] : grid.labels)
    for (const auto& label : labels)
      for (int t = 0; t <= horizon; ++t)
        p.add_fact({GroundAtom::unary(label, rid), {1.0, 1.0}, t});
  p.set_max_timestep(horizon);
  return p;
}

/// Lower bound of normal(agent) at step t in the minimal model — the score a
/// hypothesis earns from the behavioral rules it lets fire.
struct ParsimonyResult {
  ModelResult::Status status = ModelResult::Status::ok;
  double value = 0.0;
  std::optional<Inconsistency> detail;
};

inline ParsimonyResult parsimony(const std::string& agent, const Program& p, int t,
                                 std::span<const TemporalFact> extra = {}) {
  auto mm = minimal_model(p, extra);
  ParsimonyResult r;
  r.status = mm.status;
  r.detail = mm.inconsistency;
  if (mm.ok())
    r.value = mm.model.value(GroundAtom::unary(kNormalPredicate, agent), t).lower;
  return r;
}

struct AbductionQuery {
  std::string agent;
  Trajectory prefix;
  std::vector<Rule> rules;
  std::vector<TemporalFact> extra_facts;  // optional domain knowledge
  const RegionGrid* grid = nullptr;
  TimeBinning bins;
  int horizon = 0;
  int k = 1;
  std::optional<double> max_speed_kmh;
  int threads = 1;
  bool inconsistent_scores_zero = false;  // keep instead of discarding
  bool want_traces = true;
};

struct FiredRule {
  size_t rule_index = 0;
  std::string m0, m1;  // earlier/later label of the AFTER element, if any
  double confidence = 0.0;
};

struct ScoredRegion {
  std::string region_id;
  double score = 0.0;
  std::vector<FiredRule> fired;
};

struct Explanation {
  std::vector<ScoredRegion> regions;  // best first
  int horizon = 0;
  size_t candidates_scored = 0;
  size_t discarded_inconsistent = 0;
};

struct CandidateScore {
  std::string region_id;
  double score = 0.0;
  ModelResult::Status status = ModelResult::Status::ok;
};

namespace abduce_detail {

inline Program base_program(const AbductionQuery& q) {
  if (!q.grid) throw std::invalid_argument("abduction query has no grid");
  Program p = build_init_program(q.agent, q.prefix, *q.grid, q.bins, q.horizon);
  bool any_at = false;
  for (const auto& f : p.facts())
    if (f.atom.predicate == kAtPredicate) {
      any_at = true;
      break;
    }
  if (!any_at)
    throw std::invalid_argument("prefix of " + q.agent +
                                " has no points inside the grid");
  for (const auto& f : q.extra_facts) p.add_fact(f);
  for (const auto& r : q.rules) p.add_rule(r);
  return p;
}

inline std::vector<std::string> candidate_pool(const AbductionQuery& q) {
  const RegionGrid& grid = *q.grid;
  if (q.max_speed_kmh && !q.prefix.points.empty()) {
    const auto& last = q.prefix.points.back();
    int steps = q.horizon - q.bins.timestep(last.timestamp);
    return feasible_regions(grid, last.location, steps, *q.max_speed_kmh,
                            q.bins.bin_seconds);
  }
  return grid.candidate_ids;
}

}  // namespace abduce_detail

/// Scores every candidate region as the hypothesis "the agent is there at the
/// horizon". Results come back in candidate (sorted id) order and are
/// bit-identical for any thread count: each candidate's fixpoint is computed
/// independently and written to its own slot.
inline std::vector<CandidateScore> score_candidates(const AbductionQuery& q) {
  Program base = abduce_detail::base_program(q);
  std::vector<std::string> pool = abduce_detail::candidate_pool(q);
  std::vector<CandidateScore> scores(pool.size());
  parallel_for(pool.size(), q.threads, [&](size_t i) {
    TemporalFact hyp{GroundAtom::at(q.agent, pool[i]), {1.0, 1.0}, q.horizon};
    auto r = parsimony(q.agent, base, q.horizon, {&hyp, 1});
    scores[i] = {pool[i],
                 r.status == ModelResult::Status::ok ? r.value : 0.0,
                 r.status};
  });
  return scores;
}

/// Sorts by score (descending, region id ascending on ties) and keeps the
/// top k. Inconsistent hypotheses are dropped unless the query asks for them
/// to stay at score zero.
inline Explanation assemble_top_k(std::span<const CandidateScore> scores,
                                  const AbductionQuery& q) {
  Explanation ex;
  ex.horizon = q.horizon;
  ex.candidates_scored = scores.size();
  std::vector<const CandidateScore*> keep;
  keep.reserve(scores.size());
  for (const auto& s : scores) {
    if (s.status == ModelResult::Status::inconsistent && !q.inconsistent_scores_zero) {
      ++ex.discarded_inconsistent;
      continue;
    }
    keep.push_back(&s);
  }
  std::sort(keep.begin(), keep.end(), [](const CandidateScore* a, const CandidateScore* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->region_id < b->region_id;
  });
  size_t k = std::min<size_t>(static_cast<size_t>(std::max(0, q.k)), keep.size());
  ex.regions.reserve(k);
  for (size_t i = 0; i < k; ++i) ex.regions.push_back({keep[i]->region_id, keep[i]->score, {}});
  return ex;
}

/// Re-derives, for one returned region, which rules fire for the agent at the
/// horizon under that hypothesis.
inline std::vector<FiredRule> fired_rules_for(const AbductionQuery& q,
                                              const Program& base,
                                              const std::string& region_id) {
  TemporalFact hyp{GroundAtom::at(q.agent, region_id), {1.0, 1.0}, q.horizon};
  std::span<const TemporalFact> extra{&hyp, 1};
  auto mm = minimal_model(base, extra);
  std::vector<FiredRule> out;
  if (!mm.ok()) return out;
  auto u = detail::universe_of(base, extra);
  const auto& rules = base.rules();
  for (size_t ri = 0; ri < rules.size(); ++ri) {
    const Rule& r = rules[ri];
    bool all = true;
    for (const auto& e : r.body) {
      if (!element_satisfied(mm.model, q.agent, r.agent_var, e, q.horizon, u.regions)) {
        all = false;
        break;
      }
    }
    if (!all) continue;
    FiredRule fr;
    fr.rule_index = ri;
    fr.confidence = r.head_annotation.lower;
    for (const auto& e : r.body) {
      if (e.kind == BodyElement::Kind::after) {
        fr.m0 = e.second;
        fr.m1 = e.first;
        break;
      }
    }
    out.push_back(std::move(fr));
  }
  return out;
}

/// Top-k abduction: hypothesize the agent at each candidate region at the
/// horizon, keep the k most parsimonious consistent hypotheses. Rule traces
/// are assembled only for the regions actually returned.
inline Explanation abduce_top_k(const AbductionQuery& q) {
  auto scores = score_candidates(q);
  Explanation ex = assemble_top_k(scores, q);
  if (q.want_traces && !ex.regions.empty()) {
    Program base = abduce_detail::base_program(q);
    for (auto& reg : ex.regions) reg.fired = fired_rules_for(q, base, reg.region_id);
  }
  return ex;
}

/// Every ground-truth point must fall inside the region of an at-fact for the
/// agent at that point's timestep. Vacuously true for an empty point list.
inline bool entails_trajectory(const Program& p, const std::string& agent,
                               std::span<const std::pair<int, Location>> points,
                               const RegionGrid& grid,
                               std::span<const TemporalFact> extra = {}) {
  auto covered = [&](int t, Location loc) {
    auto check = [&](const TemporalFact& f) {
      if (f.timestep != t || f.atom.predicate != kAtPredicate) return false;
      if (f.atom.args.size() != 2 || f.atom.args[0] != agent) return false;
      const Region* r = grid.find(f.atom.args[1]);
      return r && r->contains(loc);
    };
    for (const auto& f : p.facts())
      if (check(f)) return true;
    for (const auto& f : extra)
      if (check(f)) return true;
    return false;
  };
  for (const auto& [t, loc] : points)
    if (!covered(t, loc)) return false;
  return true;
}

struct ExplanationCheck {
  bool consistent = false;
  bool entails = false;
  bool ok() const { return consistent && entails; }
};

/// Validates a returned hypothesis against the ground truth: adding the
/// predicted at-facts must keep the program consistent, and the facts must
/// cover the hidden points.
inline ExplanationCheck check_explanation(const Program& base,
                                          const std::string& agent,
                                          std::span<const TemporalFact> predicted,
                                          std::span<const std::pair<int, Location>> truth,
                                          const RegionGrid& grid) {
  ExplanationCheck c;
  c.consistent = minimal_model(base, predicted).ok();
  c.entails = entails_trajectory(base, agent, truth, grid, predicted);
  return c;
}

inline std::string fired_token(const FiredRule& f) {
  if (!f.m0.empty() || !f.m1.empty())
    return f.m0 + ">" + f.m1 + "@" + format_double(f.confidence);
  return "rule" + std::to_string(f.rule_index) + "@" + format_double(f.confidence);
}

inline std::string explanation_row(const ScoredRegion& reg, size_t rank,
                                   const RegionGrid& grid) {
  const Region* r = grid.find(reg.region_id);
  std::string row = std::to_string(rank) + "," + reg.region_id + ",";
  if (r) {
    row += format_double(r->min_corner.lon) + "," + format_double(r->min_corner.lat) +
           "," + format_double(r->max_corner.lon) + "," +
           format_double(r->max_corner.lat);
  } else {
    row += ",,,";
  }
  row += "," + format_double(reg.score) + ",";
  const auto& labels = grid.labels_of(reg.region_id);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) row += "|";
    row += labels[i];
  }
  row += ",";
  for (size_t i = 0; i < reg.fired.size(); ++i) {
    if (i) row += "|";
    row += fired_token(reg.fired[i]);
  }
  return row;
}

inline void write_explanation_csv(std::ostream& out, const Explanation& ex,
                                  const RegionGrid& grid) {
  out << "rank,region_id,min_lon,min_lat,max_lon,max_lat,score,labels,fired_rules\n";
  for (size_t i = 0; i < ex.regions.size(); ++i)
    out << explanation_row(ex.regions[i], i + 1, grid) << "\n";
}

}  // namespace marlin
