#pragma once

// Forward-chaining evaluation over a Network.
//
// Derived links carry canonical metadata that depends only on the explicit
// links and the rules, never on evaluation order:
//   depth       height of the shortest proof (explicit links have depth 0)
//   derivation  smallest (rule, premises, substitution) among the derivations
//               whose deepest premise has depth - 1
//   weight      minimum premise weight of that derivation
// Semi-naive round k produces exactly the links of depth k, so from-scratch
// evaluation assigns this metadata directly; incremental maintenance
// recomputes it for the affected links only.

#include <algorithm>
#include <deque>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ksengine/network.hpp"

namespace ks {

inline constexpr std::size_t kMaxBodyAtoms = 4;
inline constexpr std::size_t kMaxHeadAtoms = 2;
inline constexpr std::string_view kTransitivePrefix = "transitive.";

/// Structural checks only: arity bounds, term syntax, safety.
inline std::vector<std::string> validate_rule(const Rule& rule) {
  std::vector<std::string> out;
  if (!is_valid_id(rule.id)) out.push_back("invalid rule id '" + rule.id + "'");
  if (rule.id.rfind(kTransitivePrefix, 0) == 0) out.push_back("reserved rule id prefix");
  if (rule.body.empty()) out.push_back("empty body");
  if (rule.body.size() > kMaxBodyAtoms) out.push_back("body too long");
  if (rule.head.empty()) out.push_back("empty head");
  if (rule.head.size() > kMaxHeadAtoms) out.push_back("head too long");
  std::set<std::string> body_vars;
  auto check_term = [&](const std::string& t) {
    if (is_variable(t)) {
      if (!is_valid_id(std::string_view(t).substr(1))) out.push_back("bad variable '" + t + "'");
    } else if (!is_valid_id(t)) {
      out.push_back("bad term '" + t + "'");
    }
  };
  for (const auto& a : rule.body) {
    for (const auto* t : {&a.source, &a.type, &a.target}) {
      check_term(*t);
      if (is_variable(*t)) body_vars.insert(*t);
    }
  }
  std::set<std::string> reported;
  for (const auto& a : rule.head) {
    for (const auto* t : {&a.source, &a.type, &a.target}) {
      check_term(*t);
      if (is_variable(*t) && !body_vars.count(*t) && reported.insert(*t).second) {
        out.push_back("unsafe variable " + *t);
      }
    }
  }
  return out;
}

/// Structural checks plus: every constant names an existing node or type.
inline std::vector<std::string> validate_rule(const Network& net, const Rule& rule) {
  auto out = validate_rule(rule);
  auto check = [&](const PatternAtom& a) {
    for (const auto* t : {&a.source, &a.target}) {
      if (!is_variable(*t) && is_valid_id(*t) && !net.has_node(*t)) {
        out.push_back("unknown node " + *t);
      }
    }
    if (!is_variable(a.type) && is_valid_id(a.type) && !net.has_link_type(a.type)) {
      out.push_back("unknown link type " + a.type);
    }
  };
  for (const auto& a : rule.body) check(a);
  for (const auto& a : rule.head) check(a);
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

namespace detail {

struct AtomScope {
  const std::set<std::string>* only = nullptr;
  const std::set<std::string>* skip = nullptr;
};

struct Engine {
  /// User rules plus one transitivity rule per transitive-flagged type.
  static std::vector<Rule> effective_rules(const Network& net) {
    std::vector<Rule> rules;
    for (const auto& [id, r] : net.rules_) rules.push_back(r);
    for (const auto& [id, t] : net.link_types_) {
      if (!t.transitive) continue;
      Rule r;
      r.id = std::string(kTransitivePrefix) + id;
      r.rep = make_rep("transitive " + id);
      r.body = {{"?x", id, "?y"}, {"?y", id, "?z"}};
      r.head = {{"?x", id, "?z"}};
      rules.push_back(std::move(r));
    }
    return rules;
  }

  static const std::string* lookup(const Substitution& s, const std::string& term) {
    if (!is_variable(term)) return &term;
    auto it = s.find(term);
    return it == s.end() ? nullptr : &it->second;
  }

  static bool bind(Substitution& s, const std::string& term, const std::string& value,
                   std::vector<std::string>& bound) {
    if (!is_variable(term)) return term == value;
    auto [it, inserted] = s.emplace(term, value);
    if (inserted) {
      bound.push_back(term);
      return true;
    }
    return it->second == value;
  }

  static void unbind(Substitution& s, std::vector<std::string>& bound) {
    for (const auto& v : bound) s.erase(v);
    bound.clear();
  }

  /// Enumerates every way to match `body` against stored links (symmetric
  /// links in both orientations). `fn(substitution, premise ids)`.
  template <class Fn>
  static void match(const Network& net, const std::vector<PatternAtom>& body,
                    const std::vector<AtomScope>& scopes, Substitution& s, Fn&& fn) {
    std::vector<std::string> premises;
    match_from(net, body, scopes, 0, s, premises, fn);
  }

  template <class Fn>
  static void match_from(const Network& net, const std::vector<PatternAtom>& body,
                         const std::vector<AtomScope>& scopes, std::size_t i, Substitution& s,
                         std::vector<std::string>& premises, Fn& fn) {
    if (i == body.size()) {
      fn(static_cast<const Substitution&>(s), static_cast<const std::vector<std::string>&>(premises));
      return;
    }
    const PatternAtom& atom = body[i];
    const AtomScope& scope = scopes[i];
    const std::string* type = lookup(s, atom.type);
    const std::string* src = lookup(s, atom.source);
    const std::string* tgt = lookup(s, atom.target);
    const std::string want_type = type ? *type : std::string();
    const std::string want_src = src ? *src : std::string();
    const std::string want_tgt = tgt ? *tgt : std::string();

    auto orient = [&](const std::string& id, const std::string& from, const std::string& to,
                      const std::string& ltype) {
      std::vector<std::string> bound;
      if (bind(s, atom.type, ltype, bound) && bind(s, atom.source, from, bound) &&
          bind(s, atom.target, to, bound)) {
        premises.push_back(id);
        match_from(net, body, scopes, i + 1, s, premises, fn);
        premises.pop_back();
      }
      unbind(s, bound);
    };
    auto visit = [&](const std::string& id) {
      if (scope.skip && scope.skip->count(id)) return;
      auto it = net.links_.find(id);
      if (it == net.links_.end()) return;
      const SemanticLink& l = it->second;
      if (type && l.type != want_type) return;
      orient(id, l.source, l.target, l.type);
      if (l.source != l.target && net.is_symmetric(l.type)) orient(id, l.target, l.source, l.type);
    };

    if (scope.only) {
      for (const auto& id : *scope.only) visit(id);
    } else if (src && tgt) {
      std::set<std::string> ids;
      if (auto it = net.index_.find({want_src, want_tgt}); it != net.index_.end()) ids = it->second;
      if (auto it = net.index_.find({want_tgt, want_src}); it != net.index_.end()) {
        ids.insert(it->second.begin(), it->second.end());
      }
      for (const auto& id : ids) visit(id);
    } else if (type) {
      auto it = net.by_type_.find(want_type);
      if (it == net.by_type_.end()) return;
      const std::set<std::string> ids = it->second;
      for (const auto& id : ids) visit(id);
    } else {
      std::vector<std::string> ids;
      for (const auto& [id, l] : net.links_) ids.push_back(id);
      for (const auto& id : ids) visit(id);
    }
  }

  /// Head atom under `s`, or nullopt when it does not name a node/type/node.
  static std::optional<FactKey> instantiate(const Network& net, const PatternAtom& a,
                                            const Substitution& s) {
    const std::string* src = lookup(s, a.source);
    const std::string* type = lookup(s, a.type);
    const std::string* tgt = lookup(s, a.target);
    if (!src || !type || !tgt) return std::nullopt;
    if (!net.has_node(*src) || !net.has_node(*tgt) || !net.has_link_type(*type)) return std::nullopt;
    return FactKey{*src, *type, *tgt};
  }

  static double min_weight(const Network& net, const std::vector<std::string>& premises) {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& p : premises) w = std::min(w, net.links_.at(p).weight);
    return w;
  }

  static std::size_t proof_height(const Network& net, const std::vector<std::string>& premises) {
    std::size_t h = 0;
    for (const auto& p : premises) h = std::max(h, net.links_.at(p).depth);
    return h + 1;
  }

  /// Semi-naive rounds seeded by `delta`; new links get depth base + round.
  /// Returns the ids of every link added.
  static std::set<std::string> propagate(Network& net, const std::vector<Rule>& rules,
                                         std::set<std::string> delta, std::size_t base_depth) {
    std::set<std::string> added;
    std::size_t round = 0;
    while (!delta.empty()) {
      ++round;
      std::map<FactKey, Derivation> found;
      for (const auto& rule : rules) {
        for (std::size_t i = 0; i < rule.body.size(); ++i) {
          std::vector<AtomScope> scopes(rule.body.size());
          for (std::size_t j = 0; j < i; ++j) scopes[j].skip = &delta;
          scopes[i].only = &delta;
          Substitution s;
          match(net, rule.body, scopes, s, [&](const Substitution& sub, const std::vector<std::string>& prem) {
            for (const auto& h : rule.head) {
              auto triple = instantiate(net, h, sub);
              if (!triple) continue;
              const FactKey key = net.key_of(triple->source, triple->type, triple->target);
              if (net.by_key_.count(key)) continue;
              Derivation d{std::string(), rule.id, sub, prem};
              auto [it, inserted] = found.emplace(key, d);
              if (!inserted && d < it->second) it->second = std::move(d);
            }
          });
        }
      }
      std::set<std::string> next;
      for (auto& [key, d] : found) {
        SemanticLink l;
        l.id = Network::link_id('d', key);
        l.source = key.source;
        l.type = key.type;
        l.target = key.target;
        l.weight = min_weight(net, d.premises);
        l.depth = base_depth + round;
        d.link = l.id;
        l.derivation = std::move(d);
        next.insert(l.id);
        net.store(std::move(l));
      }
      added.insert(next.begin(), next.end());
      delta = std::move(next);
    }
    return added;
  }

  /// Every derivation of the link keyed `key` from the currently stored links.
  static std::vector<Derivation> derivations_of(const Network& net, const std::vector<Rule>& rules,
                                                const FactKey& key) {
    std::set<Derivation> out;
    std::vector<std::pair<std::string, std::string>> orientations{{key.source, key.target}};
    if (key.source != key.target && net.is_symmetric(key.type)) {
      orientations.emplace_back(key.target, key.source);
    }
    const auto found = net.by_key_.find(key);
    const std::string link = found == net.by_key_.end() ? Network::link_id('d', key) : found->second;
    for (const auto& rule : rules) {
      const std::vector<AtomScope> scopes(rule.body.size());
      for (const auto& h : rule.head) {
        for (const auto& [from, to] : orientations) {
          Substitution s;
          std::vector<std::string> bound;
          if (!bind(s, h.source, from, bound) || !bind(s, h.type, key.type, bound) ||
              !bind(s, h.target, to, bound)) {
            continue;
          }
          match(net, rule.body, scopes, s, [&](const Substitution& sub, const std::vector<std::string>& prem) {
            out.insert(Derivation{link, rule.id, sub, prem});
          });
        }
      }
    }
    return {out.begin(), out.end()};
  }

  /// Derived links with some derivation that transitively uses a seed.
  static std::set<std::string> dependents(const Network& net, const std::vector<Rule>& rules,
                                          const std::set<std::string>& seeds) {
    std::set<std::string> seen = seeds;
    std::deque<std::string> queue(seeds.begin(), seeds.end());
    std::set<std::string> out;
    while (!queue.empty()) {
      const std::set<std::string> only{queue.front()};
      queue.pop_front();
      for (const auto& rule : rules) {
        for (std::size_t i = 0; i < rule.body.size(); ++i) {
          std::vector<AtomScope> scopes(rule.body.size());
          scopes[i].only = &only;
          Substitution s;
          match(net, rule.body, scopes, s, [&](const Substitution& sub, const std::vector<std::string>&) {
            for (const auto& h : rule.head) {
              auto triple = instantiate(net, h, sub);
              if (!triple) continue;
              auto it = net.by_key_.find(net.key_of(triple->source, triple->type, triple->target));
              if (it == net.by_key_.end() || net.links_.at(it->second).is_explicit()) continue;
              if (seen.insert(it->second).second) {
                out.insert(it->second);
                queue.push_back(it->second);
              }
            }
          });
        }
      }
    }
    return out;
  }

  /// Recomputes depth, canonical derivation and weight of `affected`
  /// (derived ids) holding every other link fixed. Links are finalized in
  /// nondecreasing depth order, so each pick is already optimal.
  static void refresh(Network& net, const std::vector<Rule>& rules, std::set<std::string> affected) {
    std::map<std::string, std::vector<Derivation>> options;
    for (const auto& id : affected) {
      const auto& l = net.links_.at(id);
      options[id] = derivations_of(net, rules, net.key_of(l.source, l.type, l.target));
    }
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    auto ready = [&](const Derivation& d) {
      return std::none_of(d.premises.begin(), d.premises.end(),
                          [&](const std::string& p) { return affected.count(p) != 0; });
    };
    while (!affected.empty()) {
      std::map<std::string, std::size_t> best;
      std::size_t lowest = kNone;
      for (const auto& id : affected) {
        std::size_t b = kNone;
        for (const auto& d : options[id]) {
          if (ready(d)) b = std::min(b, proof_height(net, d.premises));
        }
        best[id] = b;
        lowest = std::min(lowest, b);
      }
      if (lowest == kNone) {
        throw std::logic_error("derived link without well-founded support: " + *affected.begin());
      }
      std::vector<std::string> batch;
      for (const auto& [id, b] : best) {
        if (b == lowest) batch.push_back(id);
      }
      for (const auto& id : batch) {
        const Derivation* pick = nullptr;
        for (const auto& d : options[id]) {
          if (ready(d) && proof_height(net, d.premises) == lowest && (!pick || d < *pick)) pick = &d;
        }
        SemanticLink& l = net.links_.at(id);
        l.depth = lowest;
        l.weight = min_weight(net, pick->premises);
        l.derivation = *pick;
      }
      for (const auto& id : batch) affected.erase(id);
    }
  }

  static void strip_derived(Network& net) {
    std::vector<std::string> derived;
    for (const auto& [id, l] : net.links_) {
      if (!l.is_explicit()) derived.push_back(id);
    }
    for (const auto& id : derived) net.unstore(id);
  }

  static void materialize_from_scratch(Network& net) {
    strip_derived(net);
    std::set<std::string> delta;
    for (const auto& [id, l] : net.links_) delta.insert(id);
    propagate(net, effective_rules(net), std::move(delta), 0);
    net.materialized_ = true;
  }

  static void on_assert(Network& net, const std::string& id) {
    const auto rules = effective_rules(net);
    auto added = propagate(net, rules, {id}, 0);
    std::set<std::string> seeds = added;
    seeds.insert(id);
    auto affected = dependents(net, rules, seeds);
    affected.insert(added.begin(), added.end());
    refresh(net, rules, std::move(affected));
  }

  /// Delete-and-rederive: drop everything that may depend on the retracted
  /// link, put back what still has support, then re-propagate.
  static void on_retract(Network& net, const std::string& id) {
    if (!net.materialized_) {
      net.unstore(id);
      return;
    }
    const auto rules = effective_rules(net);
    const auto& gone = net.links_.at(id);
    std::set<FactKey> keys{net.key_of(gone.source, gone.type, gone.target)};
    const auto over = dependents(net, rules, {id});
    for (const auto& o : over) {
      const auto& l = net.links_.at(o);
      keys.insert(net.key_of(l.source, l.type, l.target));
    }
    net.unstore(id);
    for (const auto& o : over) net.unstore(o);

    std::set<std::string> recovered;
    for (const auto& key : keys) {
      if (net.by_key_.count(key)) continue;
      auto ds = derivations_of(net, rules, key);
      if (ds.empty()) continue;
      SemanticLink l{ds.front().link, key.source, key.type, key.target, 0.0, ds.front(), 0};
      recovered.insert(l.id);
      net.store(std::move(l));
    }
    auto added = propagate(net, rules, recovered, 0);
    recovered.insert(added.begin(), added.end());
    auto affected = dependents(net, rules, recovered);
    affected.insert(recovered.begin(), recovered.end());
    refresh(net, rules, std::move(affected));
  }

  static void on_reweight(Network& net, const std::string& id) {
    const auto rules = effective_rules(net);
    refresh(net, rules, dependents(net, rules, {id}));
  }
};

}  // namespace detail

inline void Network::add_rule(Rule rule) {
  auto violations = validate_rule(*this, rule);
  if (!violations.empty()) throw Error(Errc::invalid_rule, rule.id + ": " + join(violations, "; "));
  if (rules_.count(rule.id)) throw Error(Errc::duplicate_id, rule.id);
  rules_.emplace(rule.id, std::move(rule));
  if (materialized_) rematerialize();
}

inline void Network::rematerialize() { detail::Engine::materialize_from_scratch(*this); }

inline std::string Network::assert_link(const std::string& source, const std::string& type,
                                        const std::string& target, double weight) {
  node(source);
  node(target);
  link_type(type);
  if (!(weight >= 0.0)) throw Error(Errc::negative_weight, format_real(weight));
  const FactKey key = key_of(source, type, target);
  if (auto it = by_key_.find(key); it != by_key_.end()) {
    if (links_.at(it->second).is_explicit()) {
      throw Error(Errc::duplicate_explicit_link, source + " " + type + " " + target);
    }
    unstore(it->second);
  }
  SemanticLink l;
  l.id = link_id('e', key);
  l.source = source;
  l.type = type;
  l.target = target;
  l.weight = weight;
  const std::string id = l.id;
  store(std::move(l));
  if (materialized_) detail::Engine::on_assert(*this, id);
  return id;
}

inline void Network::retract_link(const std::string& link_id) {
  const SemanticLink& l = link(link_id);
  if (!l.is_explicit()) throw Error(Errc::cannot_retract_derived, link_id);
  detail::Engine::on_retract(*this, link_id);
}

inline void Network::add_weight(const std::string& link_id, double delta) {
  auto it = links_.find(link_id);
  if (it == links_.end()) throw Error(Errc::unknown_link, link_id);
  if (!it->second.is_explicit()) throw Error(Errc::cannot_retract_derived, link_id);
  const double w = it->second.weight + delta;
  if (!(w >= 0.0)) throw Error(Errc::negative_weight, format_real(w));
  it->second.weight = w;
  if (materialized_) detail::Engine::on_reweight(*this, link_id);
}

// ---------------------------------------------------------------------------

struct FixpointResult {
  /// Every derived link of the least fixpoint, ascending by id.
  std::vector<SemanticLink> links;
  std::vector<Derivation> derivations;
};

/// Least fixpoint of the rules over the explicit links of `net`.
/// Pure: `net` is not modified.
inline FixpointResult derive_fixpoint(const Network& net) {
  for (const auto& [id, r] : net.rules()) {
    auto v = validate_rule(net, r);
    if (!v.empty()) throw Error(Errc::invalid_rule, id + ": " + join(v, "; "));
  }
  Network copy = net;
  detail::Engine::materialize_from_scratch(copy);
  FixpointResult out;
  for (const auto& [id, l] : copy.links()) {
    if (l.is_explicit()) continue;
    out.links.push_back(l);
    out.derivations.push_back(*l.derivation);
  }
  return out;
}

/// Stores the fixpoint in `net` and turns on incremental maintenance.
/// Returns the number of derived links that were not stored before.
inline std::size_t materialize(Network& net) {
  std::set<FactKey> before;
  for (const auto& [id, l] : net.links()) {
    if (!l.is_explicit()) before.insert(net.key_of(l.source, l.type, l.target));
  }
  detail::Engine::materialize_from_scratch(net);
  std::size_t fresh = 0;
  for (const auto& [id, l] : net.links()) {
    if (!l.is_explicit() && !before.count(net.key_of(l.source, l.type, l.target))) ++fresh;
  }
  return fresh;
}

/// Same contract as Network::retract_link; named for the maintenance step.
inline void retract_with_maintenance(Network& net, const std::string& explicit_link) {
  net.retract_link(explicit_link);
}

/// All derivations of every stored derived link (not only the canonical one).
inline std::map<std::string, std::vector<Derivation>> all_derivations(const Network& net) {
  const auto rules = detail::Engine::effective_rules(net);
  std::map<std::string, std::vector<Derivation>> out;
  for (const auto& [id, l] : net.links()) {
    if (l.is_explicit()) continue;
    out[id] = detail::Engine::derivations_of(net, rules, net.key_of(l.source, l.type, l.target));
  }
  return out;
}

/// Rule by id, including the synthetic rules of transitive types.
inline std::optional<Rule> find_rule(const Network& net, const std::string& id) {
  for (auto& r : detail::Engine::effective_rules(net)) {
    if (r.id == id) return r;
  }
  return std::nullopt;
}

/// True when re-applying the derivation's rule reproduces it from stored links.
inline bool replay(const Network& net, const Derivation& d) {
  auto rule = find_rule(net, d.rule);
  if (!rule || !net.has_link(d.link) || d.premises.size() != rule->body.size()) return false;
  for (std::size_t i = 0; i < rule->body.size(); ++i) {
    auto triple = detail::Engine::instantiate(net, rule->body[i], d.substitution);
    if (!triple) return false;
    auto found = net.find(triple->source, triple->type, triple->target);
    if (!found || *found != d.premises[i]) return false;
  }
  const auto& l = net.link(d.link);
  const FactKey derived = net.key_of(l.source, l.type, l.target);
  for (const auto& h : rule->head) {
    auto triple = detail::Engine::instantiate(net, h, d.substitution);
    if (triple && net.key_of(triple->source, triple->type, triple->target) == derived) return true;
  }
  return false;
}

/// Proof tree of a link: Explicit leaf, or a derivation over sub-proofs.
struct Explanation {
  std::string link;
  std::optional<Derivation> step;
  std::vector<Explanation> premises;

  bool is_explicit() const noexcept { return !step.has_value(); }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& p : premises) d = std::max(d, p.depth() + 1);
    return d;
  }

  void collect_leaves(std::set<std::string>& out) const {
    if (is_explicit()) out.insert(link);
    for (const auto& p : premises) p.collect_leaves(out);
  }

  std::set<std::string> leaves() const {
    std::set<std::string> out;
    collect_leaves(out);
    return out;
  }
};

inline Explanation explain(const Network& net, const std::string& link_id) {
  const SemanticLink& l = net.link(link_id);
  Explanation e{link_id, l.derivation, {}};
  if (l.derivation) {
    for (const auto& p : l.derivation->premises) e.premises.push_back(explain(net, p));
  }
  return e;
}

inline void render_explanation(const Network& net, const Explanation& e, std::string& out,
                               std::size_t indent = 0) {
  const auto& l = net.link(e.link);
  out.append(indent * 2, ' ');
  out += e.link + "\t" + l.source + " " + l.type + " " + l.target;
  out += e.is_explicit() ? "\texplicit\n" : "\tby " + e.step->rule + "\n";
  for (const auto& p : e.premises) render_explanation(net, p, out, indent + 1);
}

}  // namespace ks
