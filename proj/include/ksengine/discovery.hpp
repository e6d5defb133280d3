#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ksengine/category_tree.hpp"
#include "ksengine/concept_space.hpp"
#include "ksengine/error.hpp"
#include "ksengine/network.hpp"

namespace ks {

// --- verification ------------------------------------------------------------

enum class CandidateKind { link, rule, concept_ };

struct Candidate {
  CandidateKind kind = CandidateKind::link;
  FactKey link;
  Rule rule;
  Concept concept_;
  std::string source;  // provenance note
};

inline Candidate link_candidate(std::string s, std::string t, std::string o, std::string note = {}) {
  Candidate c;
  c.link = {std::move(s), std::move(t), std::move(o)};
  c.source = std::move(note);
  return c;
}

enum class VerifyMode { literal, consistency };

inline std::string_view to_string(VerifyMode m) noexcept {
  return m == VerifyMode::literal ? "literal" : "consistency";
}

/// Pairs of link types that must not both hold between the same ordered pair.
using Exclusions = std::vector<std::pair<std::string, std::string>>;

struct Verdict {
  bool accepted = false;
  std::string reason;
  VerifyMode decided_by = VerifyMode::literal;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

namespace detail {

inline std::optional<std::string> contradiction(const Network& net, const Exclusions& exclusions) {
  for (const auto& [a, b] : exclusions) {
    if (!net.has_link_type(a) || !net.has_link_type(b)) continue;
    for (const auto& [id, l] : net.links()) {
      if (l.type != a) continue;
      if (net.answers(l.source, b, l.target)) {
        return "contradiction: " + a + " and " + b + " between " + l.source + " and " + l.target;
      }
      if (net.is_symmetric(a) && net.answers(l.target, b, l.source)) {
        return "contradiction: " + a + " and " + b + " between " + l.target + " and " + l.source;
      }
    }
  }
  return std::nullopt;
}

inline Network materialized_copy(const Network& net) {
  Network copy = net;
  materialize(copy);
  return copy;
}

inline std::string fresh_rule_id(const Network& net, std::string base) {
  if (!net.rules().count(base)) return base;
  for (std::size_t i = 1;; ++i) {
    std::string id = base + "." + std::to_string(i);
    if (!net.rules().count(id)) return id;
  }
}

}  // namespace detail

/// Literal mode accepts exactly what the network already proves. Consistency
/// mode also accepts candidates whose addition derives no excluded pair.
/// Invalid payloads throw InvalidCandidate.
inline Verdict verify_knowledge(const Network& net, const Candidate& cand, VerifyMode mode = VerifyMode::literal,
                                const Exclusions& exclusions = {},
                                const std::map<std::string, Concept>* concepts = nullptr) {
  Verdict v;
  v.decided_by = VerifyMode::literal;
  switch (cand.kind) {
    case CandidateKind::link: {
      const auto& k = cand.link;
      if (!is_valid_id(k.source) || !is_valid_id(k.type) || !is_valid_id(k.target)) {
        throw Error(Errc::invalid_candidate, "link candidate ids");
      }
      if (!net.has_link_type(k.type)) throw Error(Errc::invalid_candidate, "unknown link type " + k.type);
      if (!net.has_node(k.source) || !net.has_node(k.target)) {
        v.reason = "unknown endpoint";
        return v;
      }
      const Network full = detail::materialized_copy(net);
      if (full.answers(k.source, k.type, k.target)) {
        v.accepted = true;
        v.reason = "derivable";
        return v;
      }
      v.reason = "not derivable";
      if (mode == VerifyMode::literal) return v;
      v.decided_by = VerifyMode::consistency;
      Network trial = full;
      trial.assert_link(k.source, k.type, k.target);
      if (auto c = detail::contradiction(trial, exclusions)) {
        v.reason = *c;
      } else {
        v.accepted = true;
        v.reason = "consistent";
      }
      return v;
    }
    case CandidateKind::rule: {
      auto problems = validate_rule(net, cand.rule);
      if (!problems.empty()) throw Error(Errc::invalid_candidate, join(problems, "; "));
      const Network full = detail::materialized_copy(net);
      Network trial = full;
      Rule r = cand.rule;
      r.id = detail::fresh_rule_id(trial, r.id);
      trial.add_rule(r);
      if (trial.links().size() == full.links().size()) {
        v.accepted = true;
        v.reason = "every head instance derivable";
        return v;
      }
      v.reason = "rule adds " + std::to_string(trial.links().size() - full.links().size()) + " links";
      if (mode == VerifyMode::literal) return v;
      v.decided_by = VerifyMode::consistency;
      if (auto c = detail::contradiction(trial, exclusions)) {
        v.reason = *c;
      } else {
        v.accepted = true;
        v.reason = "consistent";
      }
      return v;
    }
    case CandidateKind::concept_: {
      if (!is_valid_id(cand.concept_.id)) throw Error(Errc::invalid_candidate, "concept id");
      for (const auto& p : cand.concept_.classes) {
        const bool known = concepts ? concepts->count(p) != 0 : net.has_node(p);
        if (!known) {
          v.reason = "unknown class " + p;
          return v;
        }
      }
      v.accepted = true;
      v.reason = "classes exist";
      return v;
    }
  }
  return v;
}

inline Verdict verify_knowledge(const ConceptSpace& space, const Candidate& cand,
                                VerifyMode mode = VerifyMode::literal, const Exclusions& exclusions = {}) {
  return verify_knowledge(space.network(), cand, mode, exclusions, &space.concepts());
}

// --- cause-effect tracing ----------------------------------------------------

enum class TraceDirection { backward, forward, both, induced };

inline std::string_view to_string(TraceDirection d) noexcept {
  switch (d) {
    case TraceDirection::backward: return "backward";
    case TraceDirection::forward: return "forward";
    case TraceDirection::both: return "both";
    case TraceDirection::induced: return "induced";
  }
  return "";
}

struct TracedEdge {
  std::string link_id;
  std::string source;
  std::string type;
  std::string target;
  TraceDirection direction;

  friend bool operator==(const TracedEdge&, const TracedEdge&) = default;
};

/// Goals plus their causes (reached against link direction) and effects
/// (reached with it), with every link of the chosen types among them.
struct Subnetwork {
  std::set<std::string> nodes;
  std::set<std::string> causes;
  std::set<std::string> effects;
  std::vector<TracedEdge> edges;  // ascending by link id

  friend bool operator==(const Subnetwork&, const Subnetwork&) = default;
};

inline Subnetwork trace_cause_effect(const Network& net, const std::set<std::string>& goals,
                                     const std::set<std::string>& types) {
  if (goals.empty()) throw Error(Errc::unknown_concept, "empty goal set");
  if (types.empty()) throw Error(Errc::empty_type_set, "no cause-effect link types");
  for (const auto& g : goals) {
    if (!net.has_node(g)) throw Error(Errc::unknown_concept, g);
  }
  for (const auto& t : types) net.link_type(t);

  std::map<std::string, std::vector<std::string>> fwd, bwd;
  std::vector<const SemanticLink*> relevant;
  for (const auto& [id, l] : net.links()) {
    if (!types.count(l.type)) continue;
    relevant.push_back(&l);
    fwd[l.source].push_back(l.target);
    bwd[l.target].push_back(l.source);
    if (net.is_symmetric(l.type)) {
      fwd[l.target].push_back(l.source);
      bwd[l.source].push_back(l.target);
    }
  }
  auto reach = [&](std::map<std::string, std::vector<std::string>>& adj) {
    std::set<std::string> seen(goals.begin(), goals.end());
    std::vector<std::string> stack(goals.begin(), goals.end());
    while (!stack.empty()) {
      auto at = stack.back();
      stack.pop_back();
      for (const auto& n : adj[at]) {
        if (seen.insert(n).second) stack.push_back(n);
      }
    }
    return seen;
  };
  const auto up = reach(bwd);
  const auto down = reach(fwd);

  Subnetwork out;
  for (const auto& n : up) {
    if (!goals.count(n)) out.causes.insert(n);
  }
  for (const auto& n : down) {
    if (!goals.count(n)) out.effects.insert(n);
  }
  out.nodes = up;
  out.nodes.insert(down.begin(), down.end());
  for (const auto* l : relevant) {
    if (!out.nodes.count(l->source) || !out.nodes.count(l->target)) continue;
    const bool sym = net.is_symmetric(l->type);
    const bool back = up.count(l->target) || (sym && up.count(l->source));
    const bool forth = down.count(l->source) || (sym && down.count(l->target));
    TraceDirection d = back && forth ? TraceDirection::both
                       : back        ? TraceDirection::backward
                       : forth       ? TraceDirection::forward
                                     : TraceDirection::induced;
    out.edges.push_back({l->id, l->source, l->type, l->target, d});
  }
  return out;
}

// --- problems ----------------------------------------------------------------

enum class ProblemKind { anomaly, relationship, generalized, specialized, limitation };

inline std::string_view to_string(ProblemKind k) noexcept {
  switch (k) {
    case ProblemKind::anomaly: return "anomaly";
    case ProblemKind::relationship: return "relationship";
    case ProblemKind::generalized: return "generalized";
    case ProblemKind::specialized: return "specialized";
    case ProblemKind::limitation: return "limitation";
  }
  return "";
}

inline std::optional<ProblemKind> problem_kind_from(std::string_view s) {
  for (auto k : {ProblemKind::anomaly, ProblemKind::relationship, ProblemKind::generalized,
                 ProblemKind::specialized, ProblemKind::limitation}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// `concepts` are the network nodes the problem is about; solving starts there.
struct Problem {
  std::string id;
  ProblemKind kind = ProblemKind::anomaly;
  std::string statement;
  std::vector<std::string> evidence;
  std::optional<std::string> category;
  std::vector<std::string> concepts;

  friend bool operator==(const Problem&, const Problem&) = default;
};

struct EventRecord {
  std::string id;
  std::set<std::string> entities;
};

/// One relationship problem per entity pair seen together in at least
/// `min_support` records. Ordered by pair.
inline std::vector<Problem> detect_co_occurrence(const std::vector<EventRecord>& events, std::size_t min_support) {
  if (min_support == 0) throw Error(Errc::non_positive_input, "min_support must be at least 1");
  std::map<std::pair<std::string, std::string>, std::set<std::string>> support;
  for (const auto& e : events) {
    require_id(e.id, "record id");
    for (auto a = e.entities.begin(); a != e.entities.end(); ++a) {
      require_id(*a, "entity");
      for (auto b = std::next(a); b != e.entities.end(); ++b) support[{*a, *b}].insert(e.id);
    }
  }
  std::vector<Problem> out;
  for (const auto& [pair, records] : support) {
    if (records.size() < min_support) continue;
    Problem p;
    p.id = "co." + pair.first + "." + pair.second;
    p.kind = ProblemKind::relationship;
    p.statement = pair.first + " co-occurs with " + pair.second + " in " + std::to_string(records.size()) +
                  " records";
    p.evidence.assign(records.begin(), records.end());
    p.concepts = {pair.first, pair.second};
    out.push_back(std::move(p));
  }
  return out;
}

namespace detail {
inline const std::string& problem_category(const Problem& p, const CategoryTree& tree) {
  if (!p.category) throw Error(Errc::uncategorized_problem, p.id);
  if (!tree.contains(*p.category)) throw Error(Errc::unknown_category, *p.category);
  return *p.category;
}
}  // namespace detail

/// Copy re-anchored at the parent category.
inline Problem generalize_problem(const Problem& p, const CategoryTree& tree) {
  const auto& cat = detail::problem_category(p, tree);
  const auto& parent = tree.parent(cat);
  if (!parent) throw Error(Errc::already_at_root, cat);
  Problem g = p;
  g.id = p.id + ".up";
  g.kind = ProblemKind::generalized;
  g.category = *parent;
  g.statement = p.statement + " [in " + tree.at(*parent).name + "]";
  return g;
}

/// One copy per child category; none for a leaf.
inline std::vector<Problem> specialize_problem(const Problem& p, const CategoryTree& tree) {
  const auto& cat = detail::problem_category(p, tree);
  std::vector<Problem> out;
  for (const auto& child : tree.children(cat)) {
    Problem s = p;
    s.id = p.id + "." + child;
    s.kind = ProblemKind::specialized;
    s.category = child;
    s.statement = p.statement + " [in " + tree.at(child).name + "]";
    out.push_back(std::move(s));
  }
  return out;
}

// --- matching over observations ----------------------------------------------

struct Match {
  Substitution substitution;
  std::vector<std::string> premises;  // link ids, one per body atom

  friend bool operator==(const Match&, const Match&) = default;
};

namespace detail {

struct Fact {
  const std::string* id;
  const std::string* s;
  const std::string* t;
  const std::string* o;
};

/// Stored links, symmetric ones in both orientations.
inline std::vector<Fact> facts_of(const Network& net) {
  std::vector<Fact> out;
  for (const auto& [id, l] : net.links()) {
    out.push_back({&id, &l.source, &l.type, &l.target});
    if (net.is_symmetric(l.type) && l.source != l.target) out.push_back({&id, &l.target, &l.type, &l.source});
  }
  return out;
}

/// Every substitution satisfying the conjunction, ascending.
inline std::vector<Match> match_all(const Network& net, const std::vector<PatternAtom>& atoms) {
  const auto facts = facts_of(net);
  std::map<Substitution, std::vector<std::string>> found;
  Substitution s;
  std::vector<std::string> premises;
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == atoms.size()) {
      found.emplace(s, premises);
      return;
    }
    const auto& a = atoms[i];
    for (const auto& f : facts) {
      std::vector<std::string> bound;
      bool ok = true;
      for (auto [term, value] : {std::pair{&a.source, f.s}, std::pair{&a.type, f.t}, std::pair{&a.target, f.o}}) {
        if (!is_variable(*term)) {
          if (*term != *value) ok = false;
        } else if (auto it = s.find(*term); it != s.end()) {
          if (it->second != *value) ok = false;
        } else {
          s.emplace(*term, *value);
          bound.push_back(*term);
        }
        if (!ok) break;
      }
      if (ok) {
        premises.push_back(*f.id);
        go(i + 1);
        premises.pop_back();
      }
      for (const auto& b : bound) s.erase(b);
    }
  };
  go(0);
  std::vector<Match> out;
  for (auto& [sub, prem] : found) out.push_back({sub, prem});
  return out;
}

inline std::string ground(const std::string& term, const Substitution& s) {
  if (!is_variable(term)) return term;
  auto it = s.find(term);
  return it == s.end() ? term : it->second;
}

inline std::string render_substitution(const Substitution& s) {
  std::vector<std::string> parts;
  for (const auto& [var, value] : s) parts.push_back(var + "=" + value);
  return join(parts, ", ");
}

inline std::string render_triple(const std::string& s, const std::string& t, const std::string& o) {
  return "(" + s + ", " + t + ", " + o + ")";
}

}  // namespace detail

/// Counterexamples to `rule` in the observations: body matches whose head
/// instance is not observed. One problem per (substitution, missing head).
inline std::vector<Problem> detect_limitation(const Rule& rule, const Network& observations) {
  auto problems = validate_rule(rule);
  if (!problems.empty()) throw Error(Errc::invalid_rule, rule.id + ": " + join(problems, "; "));
  std::vector<Problem> out;
  for (const auto& m : detail::match_all(observations, rule.body)) {
    std::set<std::string> emitted;
    for (const auto& h : rule.head) {
      const auto s = detail::ground(h.source, m.substitution);
      const auto t = detail::ground(h.type, m.substitution);
      const auto o = detail::ground(h.target, m.substitution);
      if (observations.answers(s, t, o)) continue;
      const auto triple = detail::render_triple(s, t, o);
      if (!emitted.insert(triple).second) continue;
      Problem p;
      p.id = "lim." + rule.id + "." + hex64(fnv1a64(detail::render_substitution(m.substitution) + "\x1f" + triple));
      p.kind = ProblemKind::limitation;
      p.statement = "missing " + triple + " under " + detail::render_substitution(m.substitution);
      std::set<std::string> ev(m.premises.begin(), m.premises.end());
      p.evidence.assign(ev.begin(), ev.end());
      std::set<std::string> nodes;
      for (const auto& [var, value] : m.substitution) {
        if (observations.has_node(value)) nodes.insert(value);
      }
      p.concepts.assign(nodes.begin(), nodes.end());
      out.push_back(std::move(p));
    }
  }
  std::sort(out.begin(), out.end(), [](const Problem& a, const Problem& b) { return a.id < b.id; });
  return out;
}

// --- anomaly rules -------------------------------------------------------------

/// Predicate over the number of distinct condition matches.
/// `count` compares the count with `value`; `deviation` holds when
/// |count - expected| >= value.
struct Threshold {
  enum class Kind { count, deviation };
  enum class Cmp { ge, gt, le, lt, eq };
  Kind kind = Kind::count;
  Cmp cmp = Cmp::ge;
  std::int64_t value = 1;
  std::int64_t expected = 0;

  bool holds(std::size_t n) const {
    const auto c = static_cast<std::int64_t>(n);
    if (kind == Kind::deviation) return (c > expected ? c - expected : expected - c) >= value;
    switch (cmp) {
      case Cmp::ge: return c >= value;
      case Cmp::gt: return c > value;
      case Cmp::le: return c <= value;
      case Cmp::lt: return c < value;
      case Cmp::eq: return c == value;
    }
    return false;
  }

  friend bool operator==(const Threshold&, const Threshold&) = default;
};

/// "count>=3", "count<2", "count==0", "dev>=2@5" (|count - 5| >= 2).
inline Threshold parse_threshold(std::string_view text) {
  Threshold t;
  auto number = [&](std::string_view s) {
    std::int64_t v = 0;
    if (!parse_integer(s, v) || v < 0) throw Error(Errc::invalid_rule, "bad threshold '" + std::string(text) + "'");
    return v;
  };
  if (text.rfind("dev>=", 0) == 0) {
    const auto rest = text.substr(5);
    const auto at = rest.find('@');
    if (at == std::string_view::npos) throw Error(Errc::invalid_rule, "bad threshold '" + std::string(text) + "'");
    t.kind = Threshold::Kind::deviation;
    t.value = number(rest.substr(0, at));
    t.expected = number(rest.substr(at + 1));
    return t;
  }
  if (text.rfind("count", 0) != 0) throw Error(Errc::invalid_rule, "bad threshold '" + std::string(text) + "'");
  auto rest = text.substr(5);
  static const std::pair<std::string_view, Threshold::Cmp> ops[] = {
      {">=", Threshold::Cmp::ge}, {"<=", Threshold::Cmp::le}, {"==", Threshold::Cmp::eq},
      {">", Threshold::Cmp::gt},  {"<", Threshold::Cmp::lt}};
  for (const auto& [op, cmp] : ops) {
    if (rest.rfind(op, 0) == 0) {
      t.cmp = cmp;
      t.value = number(rest.substr(op.size()));
      return t;
    }
  }
  throw Error(Errc::invalid_rule, "bad threshold '" + std::string(text) + "'");
}

inline std::string render_threshold(const Threshold& t) {
  if (t.kind == Threshold::Kind::deviation) {
    return "dev>=" + std::to_string(t.value) + "@" + std::to_string(t.expected);
  }
  const char* op = t.cmp == Threshold::Cmp::ge   ? ">="
                   : t.cmp == Threshold::Cmp::gt ? ">"
                   : t.cmp == Threshold::Cmp::le ? "<="
                   : t.cmp == Threshold::Cmp::lt ? "<"
                                                 : "==";
  return std::string("count") + op + std::to_string(t.value);
}

/// Human-assigned rule for raising problems from observation links. The
/// statement may contain "{count}", replaced by the match count.
struct AnomalyRule {
  std::string id;
  std::vector<PatternAtom> condition;
  Threshold threshold;
  std::string statement;
  std::optional<std::string> category;
  std::vector<std::string> concepts;

  friend bool operator==(const AnomalyRule&, const AnomalyRule&) = default;
};

inline void validate_anomaly_rule(const AnomalyRule& r) {
  require_id(r.id, "anomaly rule id");
  if (r.condition.empty()) throw Error(Errc::invalid_rule, r.id + ": empty condition");
  Rule probe{r.id, {}, r.condition, {r.condition.front()}};
  auto problems = validate_rule(probe);
  if (!problems.empty()) throw Error(Errc::invalid_rule, r.id + ": " + join(problems, "; "));
  if (r.threshold.value < 0 || r.threshold.expected < 0) throw Error(Errc::invalid_rule, r.id + ": negative threshold");
  for (const auto& c : r.concepts) require_id(c, "concept");
}

/// One anomaly problem per rule whose condition matches at least once and
/// whose threshold holds over the number of matches.
inline std::vector<Problem> find_problem(const Network& observations, const std::vector<AnomalyRule>& rules) {
  for (const auto& r : rules) validate_anomaly_rule(r);
  std::vector<Problem> out;
  for (const auto& r : rules) {
    const auto matches = detail::match_all(observations, r.condition);
    if (matches.empty() || !r.threshold.holds(matches.size())) continue;
    Problem p;
    p.id = "anom." + r.id;
    p.kind = ProblemKind::anomaly;
    p.statement = r.statement;
    const std::string count = std::to_string(matches.size());
    for (std::size_t at = p.statement.find("{count}"); at != std::string::npos;
         at = p.statement.find("{count}", at + count.size())) {
      p.statement.replace(at, 7, count);
    }
    std::set<std::string> ev;
    for (const auto& m : matches) ev.insert(m.premises.begin(), m.premises.end());
    p.evidence.assign(ev.begin(), ev.end());
    p.category = r.category;
    p.concepts = r.concepts;
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(), [](const Problem& a, const Problem& b) { return a.id < b.id; });
  return out;
}

/// Nodes reached from the problem's concepts over `solution_types` links,
/// excluding the starting concepts.
inline std::vector<std::string> find_solution(const Network& net, const Problem& problem,
                                              const std::set<std::string>& solution_types) {
  if (problem.concepts.empty()) throw Error(Errc::unknown_concept, "problem '" + problem.id + "' names no concepts");
  const std::set<std::string> start(problem.concepts.begin(), problem.concepts.end());
  const auto sub = trace_cause_effect(net, start, solution_types);
  std::vector<std::string> out;
  for (const auto& n : sub.effects) out.push_back(n);
  return out;
}

struct Recommendation {
  Problem problem;
  std::vector<std::string> solutions;
  bool unsolved = false;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Ordered by evidence count (descending), then problem id.
inline std::vector<Recommendation> recommend(std::vector<std::pair<Problem, std::vector<std::string>>> pairs) {
  std::vector<Recommendation> out;
  for (auto& [p, s] : pairs) {
    Recommendation r{std::move(p), std::move(s), false};
    r.unsolved = r.solutions.empty();
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const Recommendation& a, const Recommendation& b) {
    if (a.problem.evidence.size() != b.problem.evidence.size()) {
      return a.problem.evidence.size() > b.problem.evidence.size();
    }
    return a.problem.id < b.problem.id;
  });
  return out;
}

}  // namespace ks
