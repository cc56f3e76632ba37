#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marlin/logic.hpp"

namespace marlin {

/// A cell whose annotation collapsed to lower > upper, with the two
/// contributions that collided.
struct Inconsistency {
  GroundAtom atom;
  int timestep = 0;
  Interval existing, incoming;
  std::string source;
};

inline std::string to_string(const Inconsistency& e) {
  return "inconsistent cell (" + to_string(e.atom) + ", t=" +
         std::to_string(e.timestep) + "): " + to_string(e.existing) + " vs " +
         to_string(e.incoming) + " from " + e.source;
}

struct GammaResult {
  Interpretation out;
  std::optional<Inconsistency> inconsistency;
  bool ok() const { return !inconsistency.has_value(); }
};

namespace detail {

struct Universe {
  std::vector<std::string> agents, regions;
  int max_timestep = 0;
};

inline Universe universe_of(const Program& p, std::span<const TemporalFact> extra) {
  Universe u{p.agents(), p.regions(), p.max_timestep()};
  for (const auto& f : extra) {
    if (f.timestep > u.max_timestep) u.max_timestep = f.timestep;
    auto note = [](std::vector<std::string>& v, const std::string& c) {
      for (const auto& x : v)
        if (x == c) return;
      v.push_back(c);
    };
    if (f.atom.predicate == kAtPredicate && f.atom.args.size() == 2) {
      note(u.agents, f.atom.args[0]);
      note(u.regions, f.atom.args[1]);
    } else if (is_feature_predicate(f.atom.predicate) && f.atom.args.size() == 1) {
      note(u.regions, f.atom.args[0]);
    } else if (!f.atom.args.empty()) {
      note(u.agents, f.atom.args[0]);
    }
  }
  return u;
}

inline GammaResult gamma_step_in(const Program& p, const Interpretation& in,
                                 std::span<const TemporalFact> extra,
                                 const Universe& u) {
  GammaResult res{in, std::nullopt};

  auto fold_fact = [&](const TemporalFact& f) {
    Interval before = res.out.value(f.atom, f.timestep);
    Interval after = res.out.combine_cell(f.atom, f.timestep, f.annotation);
    if (!after.consistent()) {
      res.inconsistency =
          Inconsistency{f.atom, f.timestep, before, f.annotation, "fact"};
      return false;
    }
    return true;
  };
  for (const auto& f : p.facts())
    if (f.timestep >= 0 && !fold_fact(f)) return res;
  for (const auto& f : extra)
    if (f.timestep >= 0 && !fold_fact(f)) return res;

  // Two phases: collect every firing against the fact-folded snapshot, then
  // apply the heads. Rule order therefore cannot influence the result.
  struct Firing {
    GroundAtom head;
    int t;
    Interval ann;
    size_t rule_index;
  };
  std::vector<Firing> fired;
  const auto& rules = p.rules();
  for (size_t ri = 0; ri < rules.size(); ++ri) {
    const Rule& r = rules[ri];
    for (const auto& agent : u.agents) {
      for (int t = 0; t <= u.max_timestep; ++t) {
        bool all = true;
        for (const auto& e : r.body) {
          if (!element_satisfied(res.out, agent, r.agent_var, e, t, u.regions)) {
            all = false;
            break;
          }
        }
        if (all)
          fired.push_back(
              {GroundAtom::unary(r.head_predicate, agent), t, r.head_annotation, ri});
      }
    }
  }
  for (const auto& f : fired) {
    Interval before = res.out.value(f.head, f.t);
    Interval after = res.out.combine_cell(f.head, f.t, f.ann);
    if (!after.consistent()) {
      res.inconsistency = Inconsistency{f.head, f.t, before, f.ann,
                                        "rule #" + std::to_string(f.rule_index)};
      return res;
    }
  }
  return res;
}

}  // namespace detail

/// One application of the consequence operator: fold all facts into the
/// interpretation, then fire every rule grounding whose body the fact-folded
/// snapshot satisfies. Monotone and inflationary in the interpretation.
inline GammaResult gamma_step(const Program& p, const Interpretation& in,
                              std::span<const TemporalFact> extra = {}) {
  return detail::gamma_step_in(p, in, extra, detail::universe_of(p, extra));
}

struct ModelResult {
  enum class Status { ok, inconsistent, diverged };
  Status status = Status::ok;
  Interpretation model;
  std::optional<Inconsistency> inconsistency;
  int iterations = 0;
  bool ok() const { return status == Status::ok; }
};

/// Least fixpoint of gamma_step from the empty interpretation. Because the
/// operator is monotone and every cell can only tighten finitely often, the
/// iteration converges; the cap below is a safety net, not a tuning knob.
/// `extra` facts are treated as part of the program without copying it.
inline ModelResult minimal_model(const Program& p,
                                 std::span<const TemporalFact> extra = {}) {
  const auto u = detail::universe_of(p, extra);
  const long groundings =
      static_cast<long>(p.rules().size()) *
      std::max<long>(1, static_cast<long>(u.agents.size())) *
      (static_cast<long>(u.max_timestep) + 1);
  const long cap = groundings + 2;

  ModelResult res;
  Interpretation cur;
  for (long i = 0; i <= cap; ++i) {
    GammaResult step = detail::gamma_step_in(p, cur, extra, u);
    res.iterations = static_cast<int>(i + 1);
    if (!step.ok()) {
      res.status = ModelResult::Status::inconsistent;
      res.inconsistency = step.inconsistency;
      return res;
    }
    if (step.out == cur) {
      res.status = ModelResult::Status::ok;
      res.model = std::move(step.out);
      return res;
    }
    cur = std::move(step.out);
  }
  res.status = ModelResult::Status::diverged;
  return res;
}

}  // namespace marlin
