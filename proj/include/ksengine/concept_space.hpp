#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ksengine/category_tree.hpp"
#include "ksengine/error.hpp"
#include "ksengine/ids.hpp"
#include "ksengine/network.hpp"
#include "ksengine/scalar.hpp"

namespace ks {

/// Link type used for co-activation links created while reading.
inline const std::string kCoOccur = "CoOccur";

/// Five-compartment concept schema. A concept is also a node of the owning
/// network, under the same id.
struct Concept {
  std::string id;
  std::string name;

  // structure
  Attributes attributes;
  std::vector<std::string> classes;
  std::vector<std::string> instances;
  std::vector<std::pair<std::string, std::string>> relations;  // (link type, concept)

  // services
  std::vector<std::string> interfaces;
  std::vector<std::vector<std::string>> processes;

  // experiences
  std::vector<std::string> use_cases;
  std::vector<std::string> objects;
  std::vector<std::string> events;

  std::vector<std::string> rules;

  // sense
  std::vector<FileRef> media;
  std::vector<std::string> language;

  bool priori = false;
  /// Set when the concept names a relation; reading then links its neighbours.
  std::optional<std::string> link_type;

  friend bool operator==(const Concept&, const Concept&) = default;
};

/// Word -> ordered candidate concepts. Order is the tie-break priority.
class Lexicon {
 public:
  void add(const std::string& word, std::vector<std::string> candidates) {
    if (word.empty()) throw Error(Errc::invalid_candidate, "empty lexicon word");
    if (candidates.empty()) throw Error(Errc::invalid_candidate, "no candidates for '" + word + "'");
    for (const auto& c : candidates) require_id(c, "candidate concept");
    if (entries_.count(word)) throw Error(Errc::duplicate_id, "lexicon word '" + word + "'");
    entries_.emplace(word, std::move(candidates));
  }

  const std::vector<std::string>* candidates(const std::string& word) const {
    auto it = entries_.find(word);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, std::vector<std::string>>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const Lexicon&, const Lexicon&) = default;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

class ConceptSpace;

namespace detail {
struct ConceptAccess {
  static Concept& get(ConceptSpace& space, const std::string& id);
};
}  // namespace detail

/// Network of concepts plus the concept records themselves.
class ConceptSpace {
 public:
  ConceptSpace() = default;
  explicit ConceptSpace(Network network) : network_(std::move(network)) {}

  Network& network() noexcept { return network_; }
  const Network& network() const noexcept { return network_; }

  const std::map<std::string, Concept>& concepts() const noexcept { return concepts_; }
  bool has_concept(const std::string& id) const { return concepts_.count(id) != 0; }

  const Concept& concept_at(const std::string& id) const {
    auto it = concepts_.find(id);
    if (it == concepts_.end()) throw Error(Errc::unknown_concept, id);
    return it->second;
  }

  /// Registers a concept, creating its network node when absent. Classes must
  /// name existing concepts (or the concept itself is rejected as a cycle).
  void add_concept(Concept c) {
    require_id(c.id, "concept id");
    if (c.name.empty()) throw Error(Errc::invalid_rep, "concept '" + c.id + "' has an empty name");
    if (concepts_.count(c.id)) throw Error(Errc::duplicate_id, c.id);
    for (const auto& p : c.classes) {
      if (p == c.id) throw Error(Errc::cycle, "concept '" + c.id + "' is its own class");
      if (!concepts_.count(p)) throw Error(Errc::unknown_concept, p);
    }
    if (c.link_type) network_.link_type(*c.link_type);
    if (!network_.has_node(c.id)) network_.add_node_with_id(c.id, make_rep(c.name));
    concepts_.emplace(c.id, std::move(c));
  }

  /// Inserts concepts whose classes may be defined later in the list.
  void add_concepts(std::vector<Concept> list) {
    std::map<std::string, Concept> pending;
    for (auto& c : list) {
      require_id(c.id, "concept id");
      if (concepts_.count(c.id) || !pending.emplace(c.id, c).second) throw Error(Errc::duplicate_id, c.id);
    }
    for (const auto& [id, c] : pending) {
      for (const auto& p : c.classes) {
        if (!pending.count(p) && !concepts_.count(p)) throw Error(Errc::dangling_reference, p);
      }
    }
    while (!pending.empty()) {
      bool progressed = false;
      for (auto it = pending.begin(); it != pending.end();) {
        const auto& cls = it->second.classes;
        const bool ready = std::all_of(cls.begin(), cls.end(), [&](const auto& p) { return concepts_.count(p) != 0; });
        if (ready) {
          add_concept(std::move(it->second));
          it = pending.erase(it);
          progressed = true;
        } else {
          ++it;
        }
      }
      if (!progressed) throw Error(Errc::cycle, "class links among '" + pending.begin()->first + "'");
    }
  }

  /// Unresolved instance/object node ids and rule ids, as "concept: id".
  std::vector<std::string> unresolved_references() const {
    std::vector<std::string> out;
    for (const auto& [id, c] : concepts_) {
      for (const auto& n : c.instances) {
        if (!network_.has_node(n)) out.push_back(id + ": " + n);
      }
      for (const auto& n : c.objects) {
        if (!network_.has_node(n)) out.push_back(id + ": " + n);
      }
      for (const auto& r : c.rules) {
        if (!network_.rules().count(r)) out.push_back(id + ": " + r);
      }
    }
    return out;
  }

  bool classes_acyclic() const {
    std::map<std::string, int> state;  // 1 visiting, 2 done
    std::function<bool(const std::string&)> visit = [&](const std::string& id) {
      int& s = state[id];
      if (s == 1) return false;
      if (s == 2) return true;
      s = 1;
      auto it = concepts_.find(id);
      if (it != concepts_.end()) {
        for (const auto& p : it->second.classes) {
          if (!visit(p)) return false;
        }
      }
      state[id] = 2;
      return true;
    };
    for (const auto& [id, c] : concepts_) {
      if (!visit(id)) return false;
    }
    return true;
  }

  friend bool operator==(const ConceptSpace&, const ConceptSpace&) = default;

 private:
  friend struct detail::ConceptAccess;

  Concept& mutable_concept(const std::string& id) {
    auto it = concepts_.find(id);
    if (it == concepts_.end()) throw Error(Errc::unknown_concept, id);
    return it->second;
  }

  Network network_;
  std::map<std::string, Concept> concepts_;
};

inline Concept& detail::ConceptAccess::get(ConceptSpace& space, const std::string& id) {
  return space.mutable_concept(id);
}

/// One concept per category, each linked to its parent's concept by a class
/// link. Imported concepts are priori. Returns the new ids in preorder.
inline std::vector<std::string> import_category_hierarchy(ConceptSpace& space, const CategoryTree& tree) {
  if (tree.empty()) throw Error(Errc::malformed_tree, "empty category tree");
  const auto order = tree.subtree(tree.root());
  for (const auto& id : order) {
    if (space.has_concept(id)) throw Error(Errc::duplicate_id, id);
  }
  for (const auto& id : order) {
    const auto& n = tree.at(id);
    Concept c;
    c.id = id;
    c.name = n.name.empty() ? id : n.name;
    if (n.parent) c.classes.push_back(*n.parent);
    c.priori = true;
    space.add_concept(std::move(c));
  }
  return order;
}

inline std::vector<std::string> import_category_hierarchy(ConceptSpace& space,
                                                          const std::vector<CategoryNode>& nodes) {
  return import_category_hierarchy(space, CategoryTree::from_nodes(nodes));
}

/// New parent concept whose attributes are the common (label, value) pairs of
/// the inputs. Each input gains a class link to it.
inline std::string generalize_concepts(ConceptSpace& space, const std::vector<std::string>& ids) {
  const std::set<std::string> distinct(ids.begin(), ids.end());
  if (distinct.size() < 2) throw Error(Errc::too_few_concepts, "need at least two distinct concepts");
  for (const auto& id : distinct) space.concept_at(id);
  auto it = distinct.begin();
  Attributes common = space.concept_at(*it).attributes;
  for (++it; it != distinct.end(); ++it) {
    const auto& other = space.concept_at(*it).attributes;
    for (auto a = common.begin(); a != common.end();) {
      auto b = other.find(a->first);
      if (b == other.end() || b->second != a->second) {
        a = common.erase(a);
      } else {
        ++a;
      }
    }
  }
  std::string id;
  for (std::size_t serial = 1;; ++serial) {
    id = serial_id('g', serial);
    if (!space.has_concept(id) && !space.network().has_node(id) && !space.network().has_link_type(id)) break;
  }
  Concept parent;
  parent.id = id;
  parent.name = id;
  parent.attributes = std::move(common);
  space.add_concept(std::move(parent));
  for (const auto& c : distinct) detail::ConceptAccess::get(space, c).classes.push_back(id);
  return id;
}

/// One entry for enrich_concept. `key` carries the text or id; attributes use
/// `key` as label and `value` as value; processes use `steps`; relations use
/// `key` as link type and `value` (text) as the related concept.
struct Enrichment {
  std::string compartment;
  std::string key;
  Scalar value = std::string();
  std::vector<std::string> steps;

  friend bool operator==(const Enrichment&, const Enrichment&) = default;
};

inline const std::vector<std::string>& concept_compartments() {
  static const std::vector<std::string> names{"attributes", "classes",  "instances", "relations", "interfaces",
                                              "processes",  "use_cases", "objects",   "events",    "rules",
                                              "media",      "language"};
  return names;
}

namespace detail {
template <class T>
void append_unique(std::vector<T>& v, T item) {
  if (std::find(v.begin(), v.end(), item) == v.end()) v.push_back(std::move(item));
}
}  // namespace detail

/// Appends entries to their compartments; identical entries are stored once
/// and an attribute label keeps its latest value.
inline const Concept& enrich_concept(ConceptSpace& space, const std::string& id,
                                     const std::vector<Enrichment>& records) {
  space.concept_at(id);
  const auto& names = concept_compartments();
  for (const auto& r : records) {
    if (std::find(names.begin(), names.end(), r.compartment) == names.end()) {
      throw Error(Errc::unknown_compartment, r.compartment);
    }
  }
  for (const auto& r : records) {
    Concept& c = detail::ConceptAccess::get(space, id);
    using detail::append_unique;
    if (r.compartment == "attributes") {
      if (!is_attribute_scalar(r.value)) throw Error(Errc::invalid_rep, "attribute '" + r.key + "'");
      c.attributes[r.key] = r.value;
    } else if (r.compartment == "classes") {
      const Concept& parent = space.concept_at(r.key);
      if (std::find(c.classes.begin(), c.classes.end(), r.key) != c.classes.end()) continue;
      c.classes.push_back(parent.id);
      if (!space.classes_acyclic()) {
        detail::ConceptAccess::get(space, id).classes.pop_back();
        throw Error(Errc::cycle, "class link " + id + " -> " + r.key);
      }
    } else if (r.compartment == "instances") {
      append_unique(c.instances, r.key);
    } else if (r.compartment == "relations") {
      const auto* target = std::get_if<std::string>(&r.value);
      if (!target) throw Error(Errc::invalid_rep, "relation target must be a concept id");
      space.network().link_type(r.key);
      space.concept_at(*target);
      append_unique(c.relations, std::pair{r.key, *target});
    } else if (r.compartment == "interfaces") {
      append_unique(c.interfaces, r.key);
    } else if (r.compartment == "processes") {
      append_unique(c.processes, r.steps);
    } else if (r.compartment == "use_cases") {
      append_unique(c.use_cases, r.key);
    } else if (r.compartment == "objects") {
      append_unique(c.objects, r.key);
    } else if (r.compartment == "events") {
      append_unique(c.events, r.key);
    } else if (r.compartment == "rules") {
      append_unique(c.rules, r.key);
    } else if (r.compartment == "media") {
      append_unique(c.media, FileRef{r.key});
    } else {
      append_unique(c.language, r.key);
    }
  }
  return space.concept_at(id);
}

// --- reading ---------------------------------------------------------------

/// A co-activation counted while reading: the concept resolved at `position`
/// met `partner`, last resolved at `partner_position`.
struct CoActivation {
  std::size_t position;
  std::size_t partner_position;
  std::string concept_id;
  std::string partner;

  friend bool operator==(const CoActivation&, const CoActivation&) = default;
};

struct ReadStep {
  std::size_t position;
  std::string token;
  std::string concept_id;
  std::size_t score;

  friend bool operator==(const ReadStep&, const ReadStep&) = default;
};

struct RelationEvent {
  std::size_t position;  // of the relation word
  std::string source;
  std::string type;
  std::string target;

  friend bool operator==(const RelationEvent&, const RelationEvent&) = default;
};

/// Everything a reading pass did. `activations` is the per-text summary.
struct ReadTrace {
  std::vector<ReadStep> resolved;
  std::vector<std::size_t> skipped;
  std::vector<CoActivation> co_activations;
  std::vector<RelationEvent> relations;
  std::vector<std::size_t> dangling_relation_words;
  std::map<std::string, std::size_t> activations;

  friend bool operator==(const ReadTrace&, const ReadTrace&) = default;
};

namespace detail {

inline void ensure_co_occur_type(Network& net) {
  if (net.has_link_type(kCoOccur)) return;
  LinkType t;
  t.id = kCoOccur;
  t.rep = make_rep("co-occurs with");
  t.symmetric = true;
  net.add_link_type(std::move(t));
}

/// Adds one unit of weight to the explicit (a, type, b) link, creating it.
inline void strengthen(Network& net, const std::string& a, const std::string& type, const std::string& b) {
  if (auto id = net.find(a, type, b); id && net.link(*id).is_explicit()) {
    net.add_weight(*id, 1.0);
  } else {
    net.assert_link(a, type, b, 1.0);
  }
}

inline std::size_t link_count(const Network& net, const std::string& a, const std::string& b) {
  std::set<std::string> ids;
  for (const auto& l : net.links_between(a, b)) ids.insert(l.id);
  for (const auto& l : net.links_between(b, a)) ids.insert(l.id);
  return ids.size();
}

}  // namespace detail

/// Reads `tokens` left to right, resolving each word through the lexicon and
/// linking the resolved concepts. Entity concepts resolved within `radius`
/// tokens before the current one form the observation scope.
inline ReadTrace read_text(ConceptSpace& space, const std::vector<std::string>& tokens, const Lexicon& lexicon,
                           const std::set<std::string>& goals, std::size_t radius) {
  if (radius == 0) throw Error(Errc::non_positive_input, "radius must be at least 1");
  for (const auto& g : goals) space.concept_at(g);
  Network& net = space.network();
  ReadTrace trace;
  if (tokens.empty()) return trace;

  // position -> resolved entity concept
  std::map<std::size_t, std::string> entities;
  std::vector<std::pair<std::size_t, std::string>> pending;  // relation words awaiting a target

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto* cands = lexicon.candidates(tokens[i]);
    std::vector<std::string> usable;
    if (cands) {
      for (const auto& c : *cands) {
        if (space.has_concept(c)) usable.push_back(c);
      }
    }
    if (usable.empty()) {
      trace.skipped.push_back(i);
      continue;
    }

    const std::size_t lo = i > radius ? i - radius : 0;
    std::map<std::string, std::size_t> scope;  // concept -> latest position
    for (auto it = entities.lower_bound(lo); it != entities.end(); ++it) scope[it->second] = it->first;

    std::set<std::string> context = goals;
    for (const auto& [c, pos] : scope) context.insert(c);

    std::string best;
    std::size_t best_score = 0;
    for (const auto& c : usable) {
      std::size_t score = 0;
      for (const auto& x : context) {
        if (x != c) score += detail::link_count(net, c, x);
      }
      if (best.empty() || score > best_score) {
        best = c;
        best_score = score;
      }
    }
    trace.resolved.push_back({i, tokens[i], best, best_score});
    ++trace.activations[best];

    const Concept& resolved = space.concept_at(best);
    if (resolved.link_type) {
      if (entities.empty()) {
        trace.dangling_relation_words.push_back(i);
      } else {
        pending.emplace_back(i, best);
      }
      continue;
    }

    for (const auto& [pos, word_concept] : pending) {
      const std::string& source = std::prev(entities.end())->second;
      const std::string& type = *space.concept_at(word_concept).link_type;
      detail::strengthen(net, source, type, best);
      detail::append_unique(detail::ConceptAccess::get(space, source).relations, std::pair{type, best});
      trace.relations.push_back({pos, source, type, best});
    }
    pending.clear();

    if (!scope.empty()) detail::ensure_co_occur_type(net);
    for (const auto& [partner, pos] : scope) {
      if (partner == best) continue;
      detail::strengthen(net, best, kCoOccur, partner);
      trace.co_activations.push_back({i, pos, best, partner});
    }
    entities[i] = best;
  }
  for (const auto& [pos, c] : pending) trace.dangling_relation_words.push_back(pos);
  std::sort(trace.dangling_relation_words.begin(), trace.dangling_relation_words.end());
  return trace;
}

}  // namespace ks
