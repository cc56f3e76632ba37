#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "marlin/logic.hpp"

namespace marlin {

/// Textual program format, one statement per line:
///
///   normal(AGT):[0.8,1] <- nearport(AGT):[1,1] & AFTER(hotspot,nearport):[1,1] ; hop=multi
///   at(v42, R_031_046):[1,1] @ 7
///   nearport(R_031_046):[1,1] @ 0
///
/// `#` starts a comment; blank lines are skipped. The head argument names the
/// rule's agent variable; body arguments equal to it are that variable. The
/// trailing `; hop=...` modifier (default single) applies to every AFTER
/// element on the line.
struct ParseError : std::runtime_error {
  int line = 0, col = 0;
  ParseError(int line_, int col_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ", col " +
                           std::to_string(col_) + ": " + msg),
        line(line_),
        col(col_) {}
};

struct ParsedProgram {
  std::vector<Rule> rules;
  std::vector<TemporalFact> facts;

  Program to_program() const {
    Program p;
    for (const auto& f : facts) p.add_fact(f);
    for (const auto& r : rules) p.add_rule(r);
    return p;
  }
};

namespace rules_detail {

struct Lexer {
  const std::string& s;
  int line;
  size_t pos = 0;

  explicit Lexer(const std::string& text, int line_no) : s(text), line(line_no) {}

  [[noreturn]] void fail(size_t at, const std::string& msg) const {
    throw ParseError(line, static_cast<int>(at) + 1, msg);
  }

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= s.size() || s[pos] == '#';
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool try_punct(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!try_punct(c)) fail(pos, std::string("expected '") + c + "' " + what);
  }
  bool try_arrow() {
    skip_ws();
    if (pos + 1 < s.size() && s[pos] == '<' && s[pos + 1] == '-') {
      pos += 2;
      return true;
    }
    return false;
  }

  static bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool ident_char(char c) {
    return ident_start(c) || (c >= '0' && c <= '9') || c == '-';
  }

  std::string ident(const char* what) {
    skip_ws();
    if (pos >= s.size() || !ident_start(s[pos]))
      fail(pos, std::string("expected ") + what);
    size_t start = pos;
    while (pos < s.size() && ident_char(s[pos])) ++pos;
    return s.substr(start, pos - start);
  }

  double number() {
    skip_ws();
    size_t start = pos;
    double v = 0;
    auto [end, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v);
    if (ec != std::errc() || end == s.data() + pos) fail(start, "expected a number");
    pos = static_cast<size_t>(end - s.data());
    return v;
  }

  long integer(const char* what) {
    skip_ws();
    size_t start = pos;
    long v = 0;
    auto [end, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v);
    if (ec != std::errc() || end == s.data() + pos)
      fail(start, std::string("expected ") + what);
    pos = static_cast<size_t>(end - s.data());
    return v;
  }

  Interval interval() {
    skip_ws();
    size_t start = pos;
    expect('[', "to open an annotation");
    double lo = number();
    expect(',', "between annotation bounds");
    double hi = number();
    expect(']', "to close the annotation");
    Interval a{lo, hi};
    if (!a.in_unit()) fail(start, "annotation bounds must lie in [0,1]");
    if (!a.consistent()) fail(start, "annotation lower bound exceeds upper bound");
    return a;
  }
};

struct AnnotatedAtom {
  GroundAtom atom;
  Interval annotation;
  bool is_after = false;
  std::string first, second;
};

inline AnnotatedAtom parse_atom(Lexer& lx) {
  AnnotatedAtom out;
  size_t at = lx.pos;
  std::string name = lx.ident("a predicate");
  lx.expect('(', "after the predicate");
  if (name == "AFTER") {
    out.is_after = true;
    out.first = lx.ident("a feature predicate");
    lx.expect(',', "between AFTER arguments");
    out.second = lx.ident("a feature predicate");
    lx.expect(')', "to close AFTER");
    if (!is_feature_predicate(out.first) || !is_feature_predicate(out.second))
      lx.fail(at, "AFTER arguments must be feature predicates");
  } else {
    out.atom.predicate = name;
    out.atom.args.push_back(lx.ident("an argument"));
    if (lx.try_punct(',')) out.atom.args.push_back(lx.ident("an argument"));
    lx.expect(')', "to close the argument list");
    if (name == kAtPredicate && out.atom.args.size() != 2)
      lx.fail(at, "`at` takes exactly two arguments");
    if (name != kAtPredicate && out.atom.args.size() != 1)
      lx.fail(at, "unary predicate given two arguments");
  }
  lx.expect(':', "before the annotation");
  out.annotation = lx.interval();
  return out;
}

}  // namespace rules_detail

inline ParsedProgram parse_rules_text(std::istream& in) {
  using rules_detail::Lexer;
  ParsedProgram out;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    Lexer lx(text, line_no);
    if (lx.done()) continue;

    auto head = rules_detail::parse_atom(lx);
    if (head.is_after) lx.fail(0, "a statement cannot start with AFTER");

    if (lx.try_arrow()) {
      Rule r;
      r.head_predicate = head.atom.predicate;
      if (head.atom.args.size() != 1)
        lx.fail(0, "rule heads must be unary");
      r.agent_var = head.atom.args[0];
      r.head_annotation = head.annotation;
      std::vector<size_t> after_elems;
      while (true) {
        auto elem = rules_detail::parse_atom(lx);
        if (elem.is_after) {
          after_elems.push_back(r.body.size());
          r.body.push_back(BodyElement::make_after(elem.first, elem.second,
                                                   elem.annotation, Hop::single));
        } else {
          r.body.push_back(BodyElement::make_literal(elem.atom, elem.annotation));
        }
        if (!lx.try_punct('&')) break;
      }
      if (lx.try_punct(';')) {
        size_t at = lx.pos;
        std::string key = lx.ident("a modifier");
        if (key != "hop") lx.fail(at, "unknown modifier `" + key + "`");
        lx.expect('=', "after `hop`");
        std::string value = lx.ident("single or multi");
        Hop hop;
        if (value == "single")
          hop = Hop::single;
        else if (value == "multi")
          hop = Hop::multi;
        else
          lx.fail(at, "hop must be `single` or `multi`, got `" + value + "`");
        for (size_t idx : after_elems) r.body[idx].hop = hop;
      }
      if (!lx.done()) lx.fail(lx.pos, "trailing input after rule");
      out.rules.push_back(std::move(r));
    } else if (lx.try_punct('@')) {
      long t = lx.integer("a timestep");
      if (t < 0) lx.fail(lx.pos, "timesteps are non-negative");
      if (!lx.done()) lx.fail(lx.pos, "trailing input after fact");
      out.facts.push_back(TemporalFact{head.atom, head.annotation,
                                       static_cast<int>(t)});
    } else {
      lx.fail(lx.pos, "expected `<-` (rule) or `@ t` (fact)");
    }
  }
  return out;
}

inline ParsedProgram parse_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rules file: " + path);
  return parse_rules_text(in);
}

inline std::string to_string(const TemporalFact& f) {
  return to_string(f.atom) + ":" + to_string(f.annotation) + " @ " +
         std::to_string(f.timestep);
}

inline std::string to_string(const Rule& r) {
  std::string s = r.head_predicate + "(" + r.agent_var + "):" +
                  to_string(r.head_annotation) + " <- ";
  bool multi = false;
  for (size_t i = 0; i < r.body.size(); ++i) {
    if (i) s += " & ";
    const BodyElement& e = r.body[i];
    if (e.kind == BodyElement::Kind::after) {
      s += "AFTER(" + e.first + "," + e.second + "):" + to_string(e.annotation);
      multi = multi || e.hop == Hop::multi;
    } else {
      s += to_string(e.atom) + ":" + to_string(e.annotation);
    }
  }
  if (multi) s += " ; hop=multi";
  return s;
}

inline void write_rules(std::ostream& out, const std::vector<Rule>& rules,
                        const std::vector<TemporalFact>& facts = {}) {
  for (const auto& r : rules) out << to_string(r) << "\n";
  for (const auto& f : facts) out << to_string(f) << "\n";
}

}  // namespace marlin
