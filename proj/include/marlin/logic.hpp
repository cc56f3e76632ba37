#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "marlin/interval.hpp"

namespace marlin {

// Predicate vocabulary. `at` is the only binary predicate (agent, region);
// `normal` is the head predicate of behavioral rules; every other predicate
// is a unary feature label over regions.
inline constexpr const char* kAtPredicate = "at";
inline constexpr const char* kNormalPredicate = "normal";

inline bool is_feature_predicate(const std::string& pred) {
  return pred != kAtPredicate && pred != kNormalPredicate;
}

struct GroundAtom {
  std::string predicate;
  std::vector<std::string> args;

  bool operator==(const GroundAtom&) const = default;

  static GroundAtom at(std::string agent, std::string region) {
    return {kAtPredicate, {std::move(agent), std::move(region)}};
  }
  static GroundAtom unary(std::string predicate, std::string arg) {
    return {std::move(predicate), {std::move(arg)}};
  }
};

inline std::string to_string(const GroundAtom& g) {
  std::string s = g.predicate;
  s += '(';
  for (size_t i = 0; i < g.args.size(); ++i) {
    if (i) s += ", ";
    s += g.args[i];
  }
  s += ')';
  return s;
}

struct AtomHash {
  size_t operator()(const GroundAtom& g) const {
    std::hash<std::string> h;
    size_t seed = h(g.predicate);
    for (const auto& a : g.args)
      seed ^= h(a) + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2);
    return seed;
  }
};

/// A ground atom asserted over one timestep with an annotation.
struct TemporalFact {
  GroundAtom atom;
  Interval annotation;
  int timestep = 0;
};

enum class Hop : uint8_t { single, multi };

inline std::string to_string(Hop h) { return h == Hop::single ? "single" : "multi"; }

/// One conjunct of a rule body. Either an annotated literal — whose argument
/// may be the rule's agent variable — or an AFTER(first, second) ordering
/// element over two feature predicates. With hop=single the earlier step is
/// exactly the preceding one; with hop=multi it is any strictly earlier step.
struct BodyElement {
  enum class Kind : uint8_t { literal, after };
  Kind kind = Kind::literal;
  GroundAtom atom;                  // literal only
  std::string first, second;        // after only: feature predicates
  Hop hop = Hop::single;            // after only
  Interval annotation;

  static BodyElement make_literal(GroundAtom a, Interval ann) {
    BodyElement e;
    e.kind = Kind::literal;
    e.atom = std::move(a);
    e.annotation = ann;
    return e;
  }
  static BodyElement make_after(std::string first, std::string second,
                                Interval ann, Hop hop) {
    BodyElement e;
    e.kind = Kind::after;
    e.first = std::move(first);
    e.second = std::move(second);
    e.annotation = ann;
    e.hop = hop;
    return e;
  }
};

/// normal(V):[c,1] <- body, fired for every grounding of the agent variable V.
struct Rule {
  std::string head_predicate = kNormalPredicate;
  std::string agent_var = "AGT";
  Interval head_annotation;
  std::vector<BodyElement> body;
};

inline GroundAtom ground(const GroundAtom& a, const std::string& agent_var,
                         const std::string& agent) {
  GroundAtom g = a;
  for (auto& arg : g.args)
    if (arg == agent_var) arg = agent;
  return g;
}

/// A set of temporal facts and rules. Facts are keyed by (atom, timestep);
/// adding a duplicate key merges annotations by intersection, which may leave
/// an inconsistent annotation (surfaced during inference, not here). The
/// program also tracks the constants seen so far: agents (first argument of
/// `at` facts and of non-feature unary facts) and regions (everything else),
/// which bound rule grounding and witness search.
class Program {
 public:
  void add_fact(TemporalFact f) {
    if (f.timestep < 0) return;  // negative time is outside the model
    note_constants(f.atom);
    if (f.timestep > max_timestep_) max_timestep_ = f.timestep;
    FactKey key{f.atom, f.timestep};
    auto it = index_.find(key);
    if (it != index_.end()) {
      auto& ann = facts_[it->second].annotation;
      ann = combine(ann, f.annotation);
      return;
    }
    index_.emplace(std::move(key), facts_.size());
    facts_.push_back(std::move(f));
  }

  void add_rule(Rule r) {
    for (const auto& e : r.body) {
      if (e.kind == BodyElement::Kind::literal) {
        if (e.atom.predicate == kAtPredicate && e.atom.args.size() == 2) {
          if (e.atom.args[1] != r.agent_var) note_region(e.atom.args[1]);
        } else if (is_feature_predicate(e.atom.predicate) &&
                   e.atom.args.size() == 1 && e.atom.args[0] != r.agent_var) {
          note_region(e.atom.args[0]);
        }
      }
    }
    rules_.push_back(std::move(r));
  }

  const std::vector<TemporalFact>& facts() const { return facts_; }
  const std::vector<Rule>& rules() const { return rules_; }

  /// Largest timestep the model ranges over. Facts raise it automatically;
  /// set_max_timestep can extend it further (e.g. to a query horizon).
  int max_timestep() const { return max_timestep_; }
  void set_max_timestep(int t) { max_timestep_ = std::max(max_timestep_, t); }

  const std::vector<std::string>& agents() const { return agents_; }
  const std::vector<std::string>& regions() const { return regions_; }

 private:
  struct FactKey {
    GroundAtom atom;
    int timestep;
    bool operator==(const FactKey&) const = default;
  };
  struct FactKeyHash {
    size_t operator()(const FactKey& k) const {
      return AtomHash{}(k.atom) * 1000003u + static_cast<size_t>(k.timestep);
    }
  };

  void note_constants(const GroundAtom& g) {
    if (g.predicate == kAtPredicate && g.args.size() == 2) {
      note_agent(g.args[0]);
      note_region(g.args[1]);
    } else if (is_feature_predicate(g.predicate) && g.args.size() == 1) {
      note_region(g.args[0]);
    } else if (!g.args.empty()) {
      note_agent(g.args[0]);
    }
  }
  void note_agent(const std::string& c) {
    if (agent_set_.insert(c).second) agents_.push_back(c);
  }
  void note_region(const std::string& c) {
    if (region_set_.insert(c).second) regions_.push_back(c);
  }

  std::vector<TemporalFact> facts_;
  std::vector<Rule> rules_;
  std::unordered_map<FactKey, size_t, FactKeyHash> index_;
  std::vector<std::string> agents_, regions_;
  std::unordered_set<std::string> agent_set_, region_set_;
  int max_timestep_ = 0;
};

/// Assignment of annotations to (ground atom, timestep) cells. Cells default
/// to bottom; bottom is never stored, so structural equality of the table is
/// semantic equality of interpretations. A side index of the `at` cells per
/// agent supports witness search for the existential body elements.
class Interpretation {
 public:
  Interval value(const GroundAtom& g, int t) const {
    auto it = table_.find(Cell{g, t});
    return it == table_.end() ? Interval::bottom() : it->second;
  }

  /// Intersects `ann` into the cell and returns the new cell value, which the
  /// caller must check for consistency. Bottom results are not stored.
  Interval combine_cell(const GroundAtom& g, int t, Interval ann) {
    if (ann.is_bottom()) return value(g, t);
    auto [it, inserted] = table_.try_emplace(Cell{g, t}, ann);
    if (inserted) {
      if (g.predicate == kAtPredicate && g.args.size() == 2)
        at_index_[g.args[0]][t].push_back(g.args[1]);
      return ann;
    }
    it->second = combine(it->second, ann);
    return it->second;
  }

  bool empty() const { return table_.empty(); }
  size_t size() const { return table_.size(); }
  bool operator==(const Interpretation& o) const { return table_ == o.table_; }

  /// Regions r with a stored at(agent, r) cell at step t, in insertion order.
  const std::vector<std::string>* at_regions(const std::string& agent, int t) const {
    auto it = at_index_.find(agent);
    if (it == at_index_.end()) return nullptr;
    auto jt = it->second.find(t);
    return jt == it->second.end() ? nullptr : &jt->second;
  }

  /// Timestep-ordered map of the agent's stored `at` cells.
  const std::map<int, std::vector<std::string>>* at_times(const std::string& agent) const {
    auto it = at_index_.find(agent);
    return it == at_index_.end() ? nullptr : &it->second;
  }

  template <class F>
  void for_each(F&& f) const {
    for (const auto& [cell, ann] : table_) f(cell.atom, cell.t, ann);
  }

 private:
  struct Cell {
    GroundAtom atom;
    int t;
    bool operator==(const Cell&) const = default;
  };
  struct CellHash {
    size_t operator()(const Cell& c) const {
      return AtomHash{}(c.atom) * 1000003u + static_cast<size_t>(c.t);
    }
  };

  std::unordered_map<Cell, Interval, CellHash> table_;
  std::unordered_map<std::string, std::map<int, std::vector<std::string>>> at_index_;
};

/// Atom-level satisfaction: the required annotation is at or below the cell.
inline bool satisfies(const Interpretation& i, const GroundAtom& g, int t,
                      Interval mu) {
  return leq(mu, i.value(g, t));
}

/// AFTER(first, second) at step t: the agent is now at a region labeled
/// `first` and was earlier (previous step for single hop, any strictly
/// earlier step for multi) at a region labeled `second`, all four atoms at
/// annotation `mu`. A bottom `mu` is vacuous at the atom level, so only the
/// existence of regions and of an earlier step matters.
inline bool satisfies_after(const Interpretation& i, const std::string& agent,
                            const BodyElement& e, int t,
                            const std::vector<std::string>& region_universe) {
  const Interval mu = e.annotation;
  if (mu.is_bottom()) return t >= 1 && !region_universe.empty();

  const auto* now = i.at_regions(agent, t);
  if (!now) return false;
  bool later_ok = false;
  for (const auto& r1 : *now) {
    if (satisfies(i, GroundAtom::at(agent, r1), t, mu) &&
        satisfies(i, GroundAtom::unary(e.first, r1), t, mu)) {
      later_ok = true;
      break;
    }
  }
  if (!later_ok) return false;

  auto earlier_at = [&](int tp, const std::vector<std::string>& regions) {
    for (const auto& r2 : regions)
      if (satisfies(i, GroundAtom::at(agent, r2), tp, mu) &&
          satisfies(i, GroundAtom::unary(e.second, r2), tp, mu))
        return true;
    return false;
  };

  if (e.hop == Hop::single) {
    if (t < 1) return false;
    const auto* prev = i.at_regions(agent, t - 1);
    return prev && earlier_at(t - 1, *prev);
  }
  const auto* times = i.at_times(agent);
  if (!times) return false;
  for (const auto& [tp, regions] : *times) {
    if (tp >= t) break;
    if (earlier_at(tp, regions)) return true;
  }
  return false;
}

/// Satisfaction of one grounded body element. A literal whose atom is a unary
/// feature predicate applied to the agent itself reads existentially over the
/// agent's history: at some step t' <= t the agent was at a region carrying
/// the feature. Ordering between such visits is the job of AFTER elements.
inline bool element_satisfied(const Interpretation& i, const std::string& agent,
                              const std::string& agent_var, const BodyElement& e,
                              int t, const std::vector<std::string>& region_universe) {
  if (e.kind == BodyElement::Kind::after)
    return satisfies_after(i, agent, e, t, region_universe);

  GroundAtom g = ground(e.atom, agent_var, agent);
  if (is_feature_predicate(g.predicate) && g.args.size() == 1 && g.args[0] == agent) {
    const Interval mu = e.annotation;
    if (mu.is_bottom()) return !region_universe.empty();
    const auto* times = i.at_times(agent);
    if (!times) return false;
    for (const auto& [tp, regions] : *times) {
      if (tp > t) break;
      for (const auto& r : regions)
        if (satisfies(i, GroundAtom::at(agent, r), tp, mu) &&
            satisfies(i, GroundAtom::unary(g.predicate, r), tp, mu))
          return true;
    }
    return false;
  }
  return satisfies(i, g, t, e.annotation);
}

}  // namespace marlin
