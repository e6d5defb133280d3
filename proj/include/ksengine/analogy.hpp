#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ksengine/error.hpp"
#include "ksengine/network.hpp"

namespace ks {

enum class AnalogyOutcome { exact, generalized, conjecture, none };

inline std::string_view to_string(AnalogyOutcome o) noexcept {
  switch (o) {
    case AnalogyOutcome::exact: return "ExactMapping";
    case AnalogyOutcome::generalized: return "GeneralizedMapping";
    case AnalogyOutcome::conjecture: return "ConjectureReport";
    case AnalogyOutcome::none: return "NoMapping";
  }
  return "";
}

enum class ConjectureStatus { present, derivable, unverified };

inline std::string_view to_string(ConjectureStatus s) noexcept {
  switch (s) {
    case ConjectureStatus::present: return "present";
    case ConjectureStatus::derivable: return "derivable";
    case ConjectureStatus::unverified: return "unverified";
  }
  return "";
}

using Triple = std::tuple<std::string, std::string, std::string>;

struct Conjecture {
  Triple link;  // in target node ids
  ConjectureStatus status = ConjectureStatus::unverified;
  bool solution = false;

  friend bool operator==(const Conjecture&, const Conjecture&) = default;
};

struct AnalogyResult {
  AnalogyOutcome outcome = AnalogyOutcome::none;
  std::map<std::string, std::string> node_map;  // source -> target
  std::vector<Triple> solution_links;           // mapped through node_map
  /// Generalized mappings: ancestor level and the type each source type became.
  std::size_t generalization_level = 0;
  std::map<std::string, std::string> type_generalization;
  std::vector<Conjecture> conjectures;
  std::vector<Triple> impact;

  friend bool operator==(const AnalogyResult&, const AnalogyResult&) = default;
};

inline constexpr std::size_t kDefaultMaxAnalogyNodes = 10;

namespace detail {

/// Relation triples of a network, symmetric links in both orientations.
inline std::set<Triple> relation_triples(const Network& net, const std::set<std::string>& skip = {}) {
  std::set<Triple> out;
  for (const auto& [id, l] : net.links()) {
    if (skip.count(id)) continue;
    out.emplace(l.source, l.type, l.target);
    if (net.is_symmetric(l.type)) out.emplace(l.target, l.type, l.source);
  }
  return out;
}

inline std::vector<std::string> node_ids(const Network& net) {
  std::vector<std::string> out;
  for (const auto& [id, n] : net.nodes()) out.push_back(id);
  return out;
}

using Signature = std::map<std::pair<std::string, bool>, std::size_t>;

inline std::map<std::string, Signature> signatures(const std::vector<std::string>& nodes,
                                                   const std::set<Triple>& rel) {
  std::map<std::string, Signature> out;
  for (const auto& n : nodes) out[n];
  for (const auto& [s, t, o] : rel) {
    ++out[s][{t, true}];
    ++out[o][{t, false}];
  }
  return out;
}

/// Bijection m with m(src_rel) = tgt_rel, if one exists.
inline std::optional<std::map<std::string, std::string>> find_isomorphism(const std::vector<std::string>& src_nodes,
                                                                          const std::set<Triple>& src_rel,
                                                                          const std::vector<std::string>& tgt_nodes,
                                                                          const std::set<Triple>& tgt_rel) {
  if (src_nodes.size() != tgt_nodes.size() || src_rel.size() != tgt_rel.size()) return std::nullopt;
  const auto ssig = signatures(src_nodes, src_rel);
  const auto tsig = signatures(tgt_nodes, tgt_rel);

  std::map<std::string, std::vector<std::pair<std::string, std::string>>> out_edges, in_edges;
  for (const auto& [s, t, o] : src_rel) {
    out_edges[s].emplace_back(t, o);
    in_edges[o].emplace_back(t, s);
  }

  std::vector<std::string> order = src_nodes;
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    std::size_t da = 0, db = 0;
    for (const auto& [k, c] : ssig.at(a)) da += c;
    for (const auto& [k, c] : ssig.at(b)) db += c;
    return da > db;
  });

  std::map<std::string, std::string> m;
  std::set<std::string> used;
  std::function<bool(std::size_t)> go = [&](std::size_t i) {
    if (i == order.size()) return true;
    const auto& a = order[i];
    for (const auto& x : tgt_nodes) {
      if (used.count(x) || tsig.at(x) != ssig.at(a)) continue;
      m[a] = x;
      bool ok = true;
      for (const auto& [t, b] : out_edges[a]) {
        auto it = m.find(b);
        if (it != m.end() && !tgt_rel.count({x, t, it->second})) ok = false;
      }
      for (const auto& [t, b] : in_edges[a]) {
        auto it = m.find(b);
        if (it != m.end() && !tgt_rel.count({it->second, t, x})) ok = false;
      }
      if (ok) {
        used.insert(x);
        if (go(i + 1)) return true;
        used.erase(x);
      }
      m.erase(a);
    }
    return false;
  };
  if (go(0)) return m;
  return std::nullopt;
}

inline std::string type_ancestor(const Network& net, std::string type, std::size_t level) {
  for (std::size_t k = 0; k < level; ++k) {
    const auto& p = net.link_type(type).parent;
    if (!p) break;
    type = *p;
  }
  return type;
}

inline std::set<Triple> generalize_triples(const Network& net, const std::set<Triple>& rel, std::size_t level) {
  std::set<Triple> out;
  for (const auto& [s, t, o] : rel) out.emplace(s, type_ancestor(net, t, level), o);
  return out;
}

/// Largest injective partial map preserving the most source relations, where
/// preserved means the image triple is in `tgt_rel`.
inline std::map<std::string, std::string> best_partial_mapping(const std::vector<std::string>& src_nodes,
                                                               const std::set<Triple>& src_rel,
                                                               const std::vector<std::string>& tgt_nodes,
                                                               const std::set<Triple>& tgt_rel) {
  std::vector<std::string> order = src_nodes;
  std::map<std::string, std::size_t> degree;
  for (const auto& [s, t, o] : src_rel) {
    ++degree[s];
    ++degree[o];
  }
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return degree[a] > degree[b]; });
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

  // relations settled once their later endpoint (in `order`) is decided
  std::vector<std::vector<Triple>> closes(order.size());
  for (const auto& r : src_rel) {
    const auto& [s, t, o] = r;
    closes[std::max(rank[s], rank[o])].push_back(r);
  }
  std::vector<std::size_t> remaining(order.size() + 1, 0);
  for (std::size_t i = order.size(); i-- > 0;) remaining[i] = remaining[i + 1] + closes[i].size();

  std::map<std::string, std::string> m, best;
  std::set<std::string> used;
  std::size_t best_score = 0;
  std::function<void(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t score) {
    if (score + remaining[i] <= best_score) return;
    if (i == order.size()) {
      if (score > best_score) {
        best_score = score;
        best = m;
      }
      return;
    }
    const auto& a = order[i];
    auto gained = [&]() {
      std::size_t g = 0;
      for (const auto& [s, t, o] : closes[i]) {
        auto ms = m.find(s), mo = m.find(o);
        if (ms != m.end() && mo != m.end() && tgt_rel.count({ms->second, t, mo->second})) ++g;
      }
      return g;
    };
    for (const auto& x : tgt_nodes) {
      if (used.count(x)) continue;
      m[a] = x;
      used.insert(x);
      go(i + 1, score + gained());
      used.erase(x);
      m.erase(a);
    }
    go(i + 1, score + gained());
  };
  go(0, 0);
  return best;
}

inline Triple map_triple(const std::map<std::string, std::string>& m, const Triple& t) {
  return {m.at(std::get<0>(t)), std::get<1>(t), m.at(std::get<2>(t))};
}

}  // namespace detail

/// Transfers the solution links of `source` onto `target` through a relation
/// preserving node map: exact first, then with generalized link types, then
/// as verified conjectures over the best partial map.
inline AnalogyResult analogize(const Network& source, const std::set<std::string>& solution_links,
                               const Network& target, std::size_t max_nodes = kDefaultMaxAnalogyNodes) {
  if (max_nodes == 0) throw Error(Errc::non_positive_input, "max_nodes must be at least 1");
  if (source.nodes().empty()) throw Error(Errc::empty_source, "source network has no nodes");
  if (source.nodes().size() > max_nodes) {
    throw Error(Errc::too_large, "source has " + std::to_string(source.nodes().size()) + " nodes");
  }
  if (target.nodes().size() > max_nodes) {
    throw Error(Errc::too_large, "target has " + std::to_string(target.nodes().size()) + " nodes");
  }
  for (const auto& id : solution_links) source.link(id);

  const auto src_nodes = detail::node_ids(source);
  const auto tgt_nodes = detail::node_ids(target);
  const auto src_rel = detail::relation_triples(source, solution_links);
  const auto tgt_rel = detail::relation_triples(target);

  AnalogyResult res;
  auto map_solutions = [&] {
    for (const auto& id : solution_links) {
      const auto& l = source.link(id);
      res.solution_links.push_back(detail::map_triple(res.node_map, {l.source, l.type, l.target}));
    }
    std::sort(res.solution_links.begin(), res.solution_links.end());
  };

  if (auto m = detail::find_isomorphism(src_nodes, src_rel, tgt_nodes, tgt_rel)) {
    res.outcome = AnalogyOutcome::exact;
    res.node_map = *m;
    map_solutions();
    return res;
  }

  auto prev_s = src_rel, prev_t = tgt_rel;
  for (std::size_t level = 1;; ++level) {
    auto gs = detail::generalize_triples(source, src_rel, level);
    auto gt = detail::generalize_triples(target, tgt_rel, level);
    if (gs == prev_s && gt == prev_t) break;
    if (auto m = detail::find_isomorphism(src_nodes, gs, tgt_nodes, gt)) {
      res.outcome = AnalogyOutcome::generalized;
      res.node_map = *m;
      res.generalization_level = level;
      for (const auto& [s, t, o] : src_rel) res.type_generalization[t] = detail::type_ancestor(source, t, level);
      map_solutions();
      return res;
    }
    prev_s = std::move(gs);
    prev_t = std::move(gt);
  }

  // Conjecture and verification over the target's derivable relations.
  Network derived = target;
  materialize(derived);
  const auto tgt_full = detail::relation_triples(derived);
  auto m = detail::best_partial_mapping(src_nodes, src_rel, tgt_nodes, tgt_full);
  std::size_t preserved = 0;
  for (const auto& t : src_rel) {
    auto s = m.find(std::get<0>(t)), o = m.find(std::get<2>(t));
    if (s != m.end() && o != m.end() && tgt_full.count({s->second, std::get<1>(t), o->second})) ++preserved;
  }
  if (preserved == 0) return res;

  res.outcome = AnalogyOutcome::conjecture;
  res.node_map = m;
  auto status_of = [&](const Triple& t) {
    const auto& [s, ty, o] = t;
    if (target.has_link_type(ty) && target.answers(s, ty, o)) return ConjectureStatus::present;
    if (derived.has_link_type(ty) && derived.answers(s, ty, o)) return ConjectureStatus::derivable;
    return ConjectureStatus::unverified;
  };
  std::set<std::pair<Triple, bool>> seen;
  for (const auto& [id, l] : source.links()) {
    if (!m.count(l.source) || !m.count(l.target)) continue;
    const bool sol = solution_links.count(id) != 0;
    const Triple t = detail::map_triple(m, {l.source, l.type, l.target});
    if (!seen.emplace(t, sol).second) continue;
    res.conjectures.push_back({t, status_of(t), sol});
    if (sol) res.solution_links.push_back(t);
  }
  std::sort(res.conjectures.begin(), res.conjectures.end(), [](const Conjecture& a, const Conjecture& b) {
    return std::tie(a.solution, a.link) < std::tie(b.solution, b.link);
  });
  std::sort(res.solution_links.begin(), res.solution_links.end());

  // Impact: derived target links whose derivations rest on a conjectured link.
  Network trial = derived;
  std::set<std::string> tainted;
  for (const auto& c : res.conjectures) {
    if (c.status != ConjectureStatus::unverified) continue;
    const auto& [s, ty, o] = c.link;
    if (!trial.has_link_type(ty)) {
      LinkType lt = source.link_type(ty);
      lt.parent.reset();
      trial.add_link_type(std::move(lt));
    }
    if (auto existing = trial.find(s, ty, o)) {
      tainted.insert(*existing);
    } else {
      tainted.insert(trial.assert_link(s, ty, o));
    }
  }
  if (!tainted.empty()) {
    const auto conjectured = tainted;
    const auto derivs = all_derivations(trial);
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& [id, ds] : derivs) {
        if (tainted.count(id)) continue;
        for (const auto& d : ds) {
          if (std::any_of(d.premises.begin(), d.premises.end(), [&](const auto& p) { return tainted.count(p) != 0; })) {
            tainted.insert(id);
            grew = true;
            break;
          }
        }
      }
    }
    for (const auto& id : tainted) {
      if (conjectured.count(id)) continue;
      const auto& l = trial.link(id);
      res.impact.emplace_back(l.source, l.type, l.target);
    }
    std::sort(res.impact.begin(), res.impact.end());
  }
  return res;
}

}  // namespace ks
