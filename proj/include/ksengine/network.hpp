#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ksengine/category_tree.hpp"
#include "ksengine/error.hpp"
#include "ksengine/ids.hpp"
#include "ksengine/scalar.hpp"

namespace ks {

struct SemanticNode {
  std::string id;
  RepBundle rep;
  Attributes attributes;
  double rank = 0.0;

  friend bool operator==(const SemanticNode&, const SemanticNode&) = default;
};

struct LinkType {
  std::string id;
  RepBundle rep;
  bool transitive = false;
  bool symmetric = false;
  std::optional<std::string> parent;

  friend bool operator==(const LinkType&, const LinkType&) = default;
};

/// One term per position; a term starting with '?' is a variable.
struct PatternAtom {
  std::string source;
  std::string type;
  std::string target;

  friend auto operator<=>(const PatternAtom&, const PatternAtom&) = default;
};

/// Conjunctive body (1..4 atoms) implies every head atom (1..2).
struct Rule {
  std::string id;
  RepBundle rep;
  std::vector<PatternAtom> body;
  std::vector<PatternAtom> head;

  friend bool operator==(const Rule&, const Rule&) = default;
};

using Substitution = std::map<std::string, std::string>;

/// Proof step: `rule` under `substitution` maps its body onto `premises`
/// (in body order) and one of its head atoms onto `link`.
struct Derivation {
  std::string link;
  std::string rule;
  Substitution substitution;
  std::vector<std::string> premises;

  friend bool operator==(const Derivation&, const Derivation&) = default;
  friend bool operator<(const Derivation& a, const Derivation& b) {
    return std::tie(a.rule, a.premises, a.substitution) <
           std::tie(b.rule, b.premises, b.substitution);
  }
};

struct SemanticLink {
  std::string id;
  std::string source;
  std::string type;
  std::string target;
  double weight = 1.0;
  /// Absent for Explicit links.
  std::optional<Derivation> derivation;
  /// Height of the shortest proof; 0 for Explicit links.
  std::size_t depth = 0;

  bool is_explicit() const noexcept { return !derivation.has_value(); }

  friend bool operator==(const SemanticLink&, const SemanticLink&) = default;
};

/// A (source, type, target) triple. Keys of symmetric types are stored with
/// source <= target so that both orientations share one key.
struct FactKey {
  std::string source;
  std::string type;
  std::string target;

  friend auto operator<=>(const FactKey&, const FactKey&) = default;
};

/// Single-hole query: exactly one of the three positions is empty.
struct QueryPattern {
  std::optional<std::string> source;
  std::optional<std::string> type;
  std::optional<std::string> target;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Parses "(a, ?, b)", "(a, T, ?)" or "(?, T, b)".
inline QueryPattern parse_query(std::string_view text) {
  const std::string t = trim(text);
  if (t.size() < 2 || t.front() != '(' || t.back() != ')') {
    throw Error(Errc::malformed_pattern, "expected '(x, y, z)' but got '" + t + "'");
  }
  std::vector<std::string> parts;
  std::string_view inner(t.data() + 1, t.size() - 2);
  std::size_t start = 0;
  while (true) {
    const auto comma = inner.find(',', start);
    parts.push_back(trim(inner.substr(start, comma == std::string_view::npos ? inner.npos
                                                                               : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) throw Error(Errc::malformed_pattern, "pattern needs three positions");
  QueryPattern q;
  int holes = 0;
  std::optional<std::string>* slots[3] = {&q.source, &q.type, &q.target};
  for (int i = 0; i < 3; ++i) {
    if (parts[i] == "?") {
      ++holes;
    } else {
      if (!is_valid_id(parts[i])) throw Error(Errc::malformed_pattern, "bad term '" + parts[i] + "'");
      *slots[i] = parts[i];
    }
  }
  if (holes != 1) throw Error(Errc::malformed_pattern, "pattern must have exactly one hole");
  return q;
}

namespace detail {
struct Engine;
}

/// Semantic link network: nodes, typed links with provenance, rules, and the
/// category hierarchy of its semantic space.
///
/// Explicit links are at most one per key. While `materialized()` holds, the
/// stored derived links are exactly the least fixpoint of the rules over the
/// explicit links, and every mutation keeps them so.
class Network {
 public:
  using ConnectionIndex = std::map<std::pair<std::string, std::string>, std::set<std::string>>;

  // --- nodes -------------------------------------------------------------

  std::string add_node(RepBundle rep, Attributes attributes = {}) {
    std::string id;
    do {
      id = serial_id('n', next_serial_++);
    } while (nodes_.count(id) || link_types_.count(id));
    add_node_with_id(id, std::move(rep), std::move(attributes));
    return id;
  }

  void add_node_with_id(const std::string& id, RepBundle rep, Attributes attributes = {},
                        double rank = 0.0) {
    require_id(id, "node id");
    if (rep.word.empty()) throw Error(Errc::invalid_rep, "node '" + id + "' has an empty word");
    for (const auto& [label, value] : attributes) {
      if (!is_attribute_scalar(value)) {
        throw Error(Errc::invalid_rep, "attribute '" + label + "' must be text, integer or real");
      }
    }
    if (nodes_.count(id)) throw Error(Errc::duplicate_id, id);
    nodes_.emplace(id, SemanticNode{id, std::move(rep), std::move(attributes), rank});
    if (next_serial_ <= nodes_.size()) next_serial_ = nodes_.size() + 1;
  }

  bool has_node(const std::string& id) const { return nodes_.count(id) != 0; }

  const SemanticNode& node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error(Errc::unknown_node, id);
    return it->second;
  }

  const std::map<std::string, SemanticNode>& nodes() const noexcept { return nodes_; }

  // --- link types --------------------------------------------------------

  void add_link_type(LinkType type) {
    require_id(type.id, "link type id");
    if (type.rep.word.empty()) throw Error(Errc::invalid_rep, "link type '" + type.id + "'");
    if (link_types_.count(type.id)) throw Error(Errc::duplicate_id, type.id);
    if (type.parent) {
      if (!link_types_.count(*type.parent)) throw Error(Errc::unknown_link_type, *type.parent);
    }
    const bool transitive = type.transitive;
    link_types_.emplace(type.id, std::move(type));
    if (transitive && materialized_) rematerialize();
  }

  /// Inserts types whose parents may appear later in the list.
  void add_link_types(std::vector<LinkType> types) {
    std::map<std::string, LinkType> pending;
    for (auto& t : types) {
      require_id(t.id, "link type id");
      if (link_types_.count(t.id) || !pending.emplace(t.id, t).second) {
        throw Error(Errc::duplicate_id, t.id);
      }
    }
    for (const auto& [id, t] : pending) {
      std::set<std::string> seen{id};
      std::optional<std::string> p = t.parent;
      while (p) {
        if (!seen.insert(*p).second) throw Error(Errc::cycle, "link type parent chain of '" + id + "'");
        if (auto it = pending.find(*p); it != pending.end()) {
          p = it->second.parent;
        } else if (link_types_.count(*p)) {
          break;
        } else {
          throw Error(Errc::dangling_reference, *p);
        }
      }
    }
    while (!pending.empty()) {
      for (auto it = pending.begin(); it != pending.end();) {
        if (!it->second.parent || link_types_.count(*it->second.parent)) {
          add_link_type(std::move(it->second));
          it = pending.erase(it);
        } else {
          ++it;
        }
      }
    }
  }

  bool has_link_type(const std::string& id) const { return link_types_.count(id) != 0; }

  const LinkType& link_type(const std::string& id) const {
    auto it = link_types_.find(id);
    if (it == link_types_.end()) throw Error(Errc::unknown_link_type, id);
    return it->second;
  }

  const std::map<std::string, LinkType>& link_types() const noexcept { return link_types_; }

  bool is_symmetric(const std::string& type) const {
    auto it = link_types_.find(type);
    return it != link_types_.end() && it->second.symmetric;
  }

  // --- semantic space ----------------------------------------------------

  CategoryTree& categories() noexcept { return categories_; }
  const CategoryTree& categories() const noexcept { return categories_; }

  /// Validates and stores a rule; re-derives when the network is materialized.
  void add_rule(Rule rule);

  const std::map<std::string, Rule>& rules() const noexcept { return rules_; }

  const Rule& rule(const std::string& id) const {
    auto it = rules_.find(id);
    if (it == rules_.end()) throw Error(Errc::unknown_rule, id);
    return it->second;
  }

  // --- links -------------------------------------------------------------

  std::string assert_link(const std::string& source, const std::string& type,
                          const std::string& target, double weight = 1.0);

  /// Removes an Explicit link; derived links are maintained.
  void retract_link(const std::string& link_id);

  /// Adds `delta` to an Explicit link's weight.
  void add_weight(const std::string& link_id, double delta);

  bool has_link(const std::string& id) const { return links_.count(id) != 0; }

  const SemanticLink& link(const std::string& id) const {
    auto it = links_.find(id);
    if (it == links_.end()) throw Error(Errc::unknown_link, id);
    return it->second;
  }

  const std::map<std::string, SemanticLink>& links() const noexcept { return links_; }

  FactKey key_of(const std::string& source, const std::string& type,
                 const std::string& target) const {
    if (is_symmetric(type) && target < source) return {target, type, source};
    return {source, type, target};
  }

  /// Id of the stored link answering (source, type, target), if any.
  std::optional<std::string> find(const std::string& source, const std::string& type,
                                  const std::string& target) const {
    auto it = by_key_.find(key_of(source, type, target));
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
  }

  bool answers(const std::string& source, const std::string& type,
               const std::string& target) const {
    return find(source, type, target).has_value();
  }

  /// Links from `a` to `b`, including symmetric links stored as (b, a).
  std::vector<SemanticLink> links_between(const std::string& a, const std::string& b) const {
    node(a);
    node(b);
    std::set<std::string> ids;
    if (auto it = index_.find({a, b}); it != index_.end()) ids = it->second;
    if (auto it = index_.find({b, a}); it != index_.end()) {
      for (const auto& id : it->second) {
        if (is_symmetric(links_.at(id).type)) ids.insert(id);
      }
    }
    std::vector<SemanticLink> out;
    for (const auto& id : ids) out.push_back(links_.at(id));
    return out;
  }

  /// Values closing the hole of `q`, ascending.
  std::vector<std::string> answer_query(const QueryPattern& q) const {
    int holes = !q.source + !q.type + !q.target;
    if (holes != 1 || (!q.type && (!q.source || !q.target))) {
      throw Error(Errc::malformed_pattern, "pattern must have exactly one hole");
    }
    if (q.source) node(*q.source);
    if (q.target) node(*q.target);
    if (q.type) link_type(*q.type);
    std::set<std::string> out;
    if (!q.type) {
      for (const auto& l : links_between(*q.source, *q.target)) out.insert(l.type);
    } else {
      const bool sym = is_symmetric(*q.type);
      auto it = by_type_.find(*q.type);
      if (it != by_type_.end()) {
        for (const auto& id : it->second) {
          const auto& l = links_.at(id);
          if (q.source) {
            if (l.source == *q.source) out.insert(l.target);
            if (sym && l.target == *q.source) out.insert(l.source);
          } else {
            if (l.target == *q.target) out.insert(l.source);
            if (sym && l.source == *q.target) out.insert(l.target);
          }
        }
      }
    }
    return {out.begin(), out.end()};
  }

  /// rank(v) = weighted in-degree of v / total weighted in-degree; uniform
  /// when no weight flows.
  std::map<std::string, double> recompute_ranks() {
    std::map<std::string, double> in;
    double total = 0.0;
    for (const auto& [id, n] : nodes_) in[id] = 0.0;
    for (const auto& [id, l] : links_) {
      in[l.target] += l.weight;
      total += l.weight;
    }
    for (auto& [id, r] : in) {
      r = total > 0.0 ? r / total : 1.0 / static_cast<double>(nodes_.size());
      nodes_.at(id).rank = r;
    }
    return in;
  }

  const ConnectionIndex& connection_index() const noexcept { return index_; }

  bool materialized() const noexcept { return materialized_; }

  std::size_t explicit_link_count() const {
    return static_cast<std::size_t>(std::count_if(
        links_.begin(), links_.end(), [](const auto& kv) { return kv.second.is_explicit(); }));
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.nodes_ == b.nodes_ && a.link_types_ == b.link_types_ && a.links_ == b.links_ &&
           a.categories_ == b.categories_ && a.rules_ == b.rules_;
  }

 private:
  friend struct detail::Engine;

  static std::string link_id(char prefix, const FactKey& key) {
    std::string bytes = key.source;
    bytes += '\x1f';
    bytes += key.type;
    bytes += '\x1f';
    bytes += key.target;
    return std::string(1, prefix) + hex64(fnv1a64(bytes));
  }

  void store(SemanticLink link) {
    const FactKey key = key_of(link.source, link.type, link.target);
    if (links_.count(link.id)) {
      throw Error(Errc::duplicate_id, "link id collision on '" + link.id + "'");
    }
    by_key_.emplace(key, link.id);
    index_[{link.source, link.target}].insert(link.id);
    by_type_[link.type].insert(link.id);
    links_.emplace(link.id, std::move(link));
  }

  void unstore(std::string id) {
    auto it = links_.find(id);
    const SemanticLink& l = it->second;
    by_key_.erase(key_of(l.source, l.type, l.target));
    auto idx = index_.find({l.source, l.target});
    idx->second.erase(id);
    if (idx->second.empty()) index_.erase(idx);
    auto ty = by_type_.find(l.type);
    ty->second.erase(id);
    if (ty->second.empty()) by_type_.erase(ty);
    links_.erase(it);
  }

  void rematerialize();

  std::map<std::string, SemanticNode> nodes_;
  std::map<std::string, LinkType> link_types_;
  std::map<std::string, SemanticLink> links_;
  std::map<FactKey, std::string> by_key_;
  ConnectionIndex index_;
  std::map<std::string, std::set<std::string>> by_type_;
  CategoryTree categories_;
  std::map<std::string, Rule> rules_;
  std::size_t next_serial_ = 1;
  bool materialized_ = false;
};

}  // namespace ks

#include "ksengine/rule_engine.hpp"
