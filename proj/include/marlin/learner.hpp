#pragma once

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "marlin/features.hpp"
#include "marlin/logic.hpp"
#include "marlin/trajectory.hpp"

namespace marlin {

using LabelSequence = std::vector<std::pair<int, std::vector<std::string>>>;

/// Label transition statistics over a corpus of label sequences. Counting
/// walks consecutive sequence entries, so every interior entry is tallied
/// twice in the unary counts (once as source, once as target); confidences
/// computed from these tallies are clamped at 1.
struct TransitionCounts {
  std::map<std::string, long> unary;
  std::map<std::pair<std::string, std::string>, long> pairs;  // (earlier, later)
  Hop hop = Hop::single;
};

inline TransitionCounts count_transitions(std::span<const LabelSequence> seqs,
                                          Hop hop, int max_hops = 0) {
  TransitionCounts c;
  c.hop = hop;
  for (const auto& seq : seqs) {
    for (size_t n = 1; n < seq.size(); ++n) {
      for (const auto& m1 : seq[n].second) ++c.unary[m1];
      for (const auto& m0 : seq[n - 1].second) ++c.unary[m0];
      size_t lo = 0;
      if (hop == Hop::single)
        lo = n - 1;
      else if (max_hops > 0 && n > static_cast<size_t>(max_hops))
        lo = n - static_cast<size_t>(max_hops);
      for (size_t m = lo; m < n; ++m)
        for (const auto& m0 : seq[m].second)
          for (const auto& m1 : seq[n].second) ++c.pairs[{m0, m1}];
    }
  }
  return c;
}

struct RuleProvenance {
  std::string m0, m1;  // earlier, later label
  Hop hop = Hop::single;
  long pair_count = 0;
  long unary_count = 0;
  double confidence = 0.0;
  bool clamped = false;
};

struct LearnedRuleSet {
  std::vector<Rule> rules;
  std::vector<RuleProvenance> provenance;  // one row per emitted rule
  Hop hop = Hop::single;
  long below_support = 0;
  long below_confidence = 0;
  long clamped = 0;
};

/// Emits one behavioral rule per surviving transition:
///   normal(AGT):[c,1] <- m0(AGT):[1,1] & m1(AGT):[1,1] & AFTER(m1,m0):[1,1]
/// where c = pairs(m0,m1) / unary(m0), clamped into [0,1]. Emission order
/// follows the sorted pair keys, so output is deterministic.
inline LearnedRuleSet emit_rules(const TransitionCounts& counts, long min_support,
                                 double min_confidence) {
  LearnedRuleSet out;
  out.hop = counts.hop;
  for (const auto& [key, pair_count] : counts.pairs) {
    const auto& [m0, m1] = key;
    if (pair_count < min_support) {
      ++out.below_support;
      continue;
    }
    auto it = counts.unary.find(m0);
    long denom = it == counts.unary.end() ? 0 : it->second;
    if (denom <= 0) continue;
    double conf = static_cast<double>(pair_count) / static_cast<double>(denom);
    bool clamp = conf > 1.0;
    if (clamp) {
      conf = 1.0;
      ++out.clamped;
    }
    if (conf < min_confidence) {
      ++out.below_confidence;
      continue;
    }
    Rule r;
    r.head_predicate = kNormalPredicate;
    r.agent_var = "AGT";
    r.head_annotation = {conf, 1.0};
    r.body.push_back(
        BodyElement::make_literal(GroundAtom::unary(m0, "AGT"), {1.0, 1.0}));
    r.body.push_back(
        BodyElement::make_literal(GroundAtom::unary(m1, "AGT"), {1.0, 1.0}));
    r.body.push_back(BodyElement::make_after(m1, m0, {1.0, 1.0}, counts.hop));
    out.rules.push_back(std::move(r));
    out.provenance.push_back(
        {m0, m1, counts.hop, pair_count, denom, conf, clamp});
  }
  return out;
}

/// Full pipeline: trajectories -> region sequences on the labeled grid ->
/// label sequences -> transition counts -> rules.
inline LearnedRuleSet learn(std::span<const Trajectory> trajs,
                            const RegionGrid& grid, const TimeBinning& bins,
                            Hop hop, long min_support = 2,
                            double min_confidence = 0.05, int max_hops = 0) {
  std::vector<LabelSequence> seqs;
  seqs.reserve(trajs.size());
  for (const auto& tr : trajs) {
    auto regions = to_region_sequence(tr, grid, bins);
    seqs.push_back(to_label_sequence(regions, grid));
  }
  auto counts = count_transitions(seqs, hop, max_hops);
  return emit_rules(counts, min_support, min_confidence);
}

inline void write_provenance_csv(std::ostream& out, const LearnedRuleSet& rs) {
  out << "m0,m1,hop,pair_count,unary_count,confidence,clamped\n";
  for (const auto& p : rs.provenance) {
    out << p.m0 << ',' << p.m1 << ',' << to_string(p.hop) << ',' << p.pair_count
        << ',' << p.unary_count << ',' << format_double(p.confidence) << ','
        << (p.clamped ? 1 : 0) << '\n';
  }
}

}  // namespace marlin
