#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ksengine/error.hpp"
#include "ksengine/scalar.hpp"
#include "ksengine/state.hpp"

namespace ks {

inline constexpr std::string_view kKsifHeader = "KSIF 1";

/// Record kinds in canonical export order.
inline const std::vector<std::string>& ksif_kinds() {
  static const std::vector<std::string> kinds{"LINKTYPE", "NODE",    "LINK",   "RULE",    "DIM",        "CAT",
                                              "PLACE",    "CONCEPT", "LEXEME", "PROBLEM", "ANOMALYRULE"};
  return kinds;
}

// --- field and list encoding -------------------------------------------------

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s, std::size_t line = 0) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) throw Error(Errc::malformed_record, "dangling escape", line);
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      default: throw Error(Errc::malformed_record, std::string("unknown escape \\") + s[i], line);
    }
  }
  return out;
}

/// '|'-joined elements; inside an element '\' and '|' are backslash-escaped
/// and an empty element is written "\-". An empty list is an empty string.
inline std::string encode_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '|';
    if (items[i].empty()) {
      out += "\\-";
      continue;
    }
    for (char c : items[i]) {
      if (c == '\\' || c == '|') out += '\\';
      out += c;
    }
  }
  return out;
}

inline std::vector<std::string> decode_list(std::string_view s, std::size_t line = 0) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  bool empty_marker = false;
  auto finish = [&] {
    if (cur.empty() && !empty_marker) throw Error(Errc::malformed_record, "empty list element", line);
    if (empty_marker && !cur.empty()) throw Error(Errc::malformed_record, "bad empty-element marker", line);
    out.push_back(std::move(cur));
    cur.clear();
    empty_marker = false;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '|') {
      finish();
    } else if (c == '\\') {
      if (++i == s.size()) throw Error(Errc::malformed_record, "dangling list escape", line);
      if (s[i] == '-') {
        if (empty_marker) throw Error(Errc::malformed_record, "bad empty-element marker", line);
        empty_marker = true;
      } else if (s[i] == '\\' || s[i] == '|') {
        cur += s[i];
      } else {
        throw Error(Errc::malformed_record, std::string("unknown list escape \\") + s[i], line);
      }
    } else {
      cur += c;
    }
  }
  finish();
  return out;
}

// --- documents -----------------------------------------------------------------

struct KsifRecord {
  std::string kind;
  std::vector<std::string> fields;  // unescaped
  std::size_t line = 0;
};

struct KsifDocument {
  std::vector<KsifRecord> records;
};

inline KsifDocument parse_ksif(std::string_view text) {
  KsifDocument doc;
  std::size_t pos = 0, line = 0;
  bool header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view l = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (!header) {
      if (l != kKsifHeader) throw Error(Errc::bad_header, "first line must be \"KSIF 1\"", 1);
      header = true;
      continue;
    }
    if (l.empty() || l.front() == '#') continue;
    KsifRecord rec;
    rec.line = line;
    std::size_t start = 0;
    bool first = true;
    while (true) {
      const std::size_t tab = l.find('\t', start);
      const std::string_view raw = l.substr(start, tab == std::string_view::npos ? l.npos : tab - start);
      if (first) {
        rec.kind = std::string(raw);
        first = false;
      } else {
        rec.fields.push_back(unescape_field(raw, line));
      }
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    const auto& kinds = ksif_kinds();
    if (std::find(kinds.begin(), kinds.end(), rec.kind) == kinds.end()) {
      throw Error(Errc::unknown_kind, "'" + rec.kind + "'", line);
    }
    doc.records.push_back(std::move(rec));
  }
  if (!header) throw Error(Errc::bad_header, "missing \"KSIF 1\" header", 1);
  return doc;
}

inline std::string render_record(const std::string& kind, const std::vector<std::string>& fields) {
  std::string out = kind;
  for (const auto& f : fields) {
    out += '\t';
    out += escape_field(f);
  }
  out += '\n';
  return out;
}

namespace detail::ksif {

inline std::vector<std::string> rep_fields(const RepBundle& rep) {
  return {encode_scalar(rep.rep_c), rep.word, rep.rep_h, encode_list({rep.rep_k.begin(), rep.rep_k.end()})};
}

inline std::string encode_attributes(const Attributes& attrs) {
  std::vector<std::string> flat;
  for (const auto& [label, value] : attrs) {
    flat.push_back(label);
    flat.push_back(encode_scalar(value));
  }
  return encode_list(flat);
}

inline std::string encode_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<std::string> flat;
  for (const auto& [a, b] : pairs) {
    flat.push_back(a);
    flat.push_back(b);
  }
  return encode_list(flat);
}

inline std::string encode_map(const std::map<std::string, std::string>& m) {
  return encode_pairs({m.begin(), m.end()});
}

inline std::string encode_atoms(const std::vector<PatternAtom>& atoms) {
  std::vector<std::string> parts;
  for (const auto& a : atoms) parts.push_back(encode_list({a.source, a.type, a.target}));
  return encode_list(parts);
}

inline std::string real(double v) { return format_real(v); }

// Decoding helpers; every failure carries the record's line.
struct Reader {
  const KsifRecord& rec;

  [[noreturn]] void fail(Errc code, const std::string& detail) const { throw Error(code, detail, rec.line); }

  void expect_fields(std::size_t n) const {
    if (rec.fields.size() != n) {
      fail(Errc::malformed_record, rec.kind + " needs " + std::to_string(n) + " fields, got " +
                                       std::to_string(rec.fields.size()));
    }
  }

  const std::string& id(std::size_t i) const {
    if (!is_valid_id(rec.fields[i])) fail(Errc::malformed_record, "bad id '" + rec.fields[i] + "'");
    return rec.fields[i];
  }

  std::optional<std::string> optional_id(std::size_t i) const {
    if (rec.fields[i].empty()) return std::nullopt;
    return id(i);
  }

  std::vector<std::string> list(std::size_t i) const { return decode_list(rec.fields[i], rec.line); }

  std::vector<std::string> id_list(std::size_t i) const {
    auto out = list(i);
    for (const auto& x : out) {
      if (!is_valid_id(x)) fail(Errc::malformed_record, "bad id '" + x + "'");
    }
    return out;
  }

  std::vector<std::pair<std::string, std::string>> pairs(std::size_t i) const {
    auto flat = list(i);
    if (flat.size() % 2) fail(Errc::malformed_record, "odd-length pair list");
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t k = 0; k < flat.size(); k += 2) out.emplace_back(flat[k], flat[k + 1]);
    return out;
  }

  Scalar scalar(const std::string& text) const {
    try {
      return decode_scalar(text);
    } catch (const Error& e) {
      fail(e.code(), e.detail());
    }
  }

  Attributes attributes(std::size_t i) const {
    Attributes out;
    for (const auto& [label, value] : pairs(i)) {
      if (!out.emplace(label, scalar(value)).second) fail(Errc::malformed_record, "repeated attribute " + label);
    }
    return out;
  }

  RepBundle rep(std::size_t i) const {
    RepBundle r;
    r.rep_c = scalar(rec.fields[i]);
    r.word = rec.fields[i + 1];
    r.rep_h = rec.fields[i + 2];
    auto k = list(i + 3);
    r.rep_k = {k.begin(), k.end()};
    if (r.rep_k.size() != k.size()) fail(Errc::malformed_record, "repeated rep_k entry");
    return r;
  }

  double real(std::size_t i) const {
    double v = 0;
    if (!parse_real(rec.fields[i], v)) fail(Errc::malformed_record, "bad number '" + rec.fields[i] + "'");
    return v;
  }

  std::size_t count(std::size_t i) const {
    std::int64_t v = 0;
    if (!parse_integer(rec.fields[i], v) || v < 0) fail(Errc::malformed_record, "bad count '" + rec.fields[i] + "'");
    return static_cast<std::size_t>(v);
  }

  std::vector<PatternAtom> atoms(std::size_t i) const {
    std::vector<PatternAtom> out;
    for (const auto& a : list(i)) {
      auto parts = decode_list(a, rec.line);
      if (parts.size() != 3) fail(Errc::malformed_record, "pattern atom needs three terms");
      out.push_back({parts[0], parts[1], parts[2]});
    }
    return out;
  }
};

/// Rethrows engine errors with the record's line attached.
template <class F>
void at_line(const KsifRecord& rec, F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.line()) throw;
    throw Error(e.code(), e.detail(), rec.line);
  }
}

/// Adds nodes in parent-first order; `parent_of` returns the parent or "".
template <class Node, class ParentOf, class Add>
void add_parent_first(std::vector<std::pair<const KsifRecord*, Node>> items, ParentOf parent_of, Add add,
                      const std::function<bool(const std::string&)>& known) {
  while (!items.empty()) {
    bool progressed = false;
    for (auto it = items.begin(); it != items.end();) {
      const std::string p = parent_of(it->second);
      if (p.empty() || known(p)) {
        at_line(*it->first, [&] { add(it->second); });
        it = items.erase(it);
        progressed = true;
      } else {
        ++it;
      }
    }
    if (!progressed) {
      const auto& [rec, node] = items.front();
      bool pending = false;
      for (const auto& [r, n] : items) pending = pending || n.id == parent_of(node);
      throw Error(pending ? Errc::cycle : Errc::dangling_reference, parent_of(node), rec->line);
    }
  }
}

}  // namespace detail::ksif

// --- export ------------------------------------------------------------------------

/// Canonical text: kinds in ksif_kinds() order, each group ascending by id.
inline std::string export_state(const KnowledgeState& state) {
  using namespace detail::ksif;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> groups;
  auto emit = [&](const std::string& kind, const std::string& key, const std::vector<std::string>& fields) {
    groups[kind].emplace_back(key, render_record(kind, fields));
  };
  const Network& net = state.network();

  for (const auto& [id, t] : net.link_types()) {
    auto f = rep_fields(t.rep);
    f.insert(f.begin(), id);
    f.push_back(std::string(t.transitive ? "T" : "") + (t.symmetric ? "S" : ""));
    f.push_back(t.parent.value_or(""));
    emit("LINKTYPE", id, f);
  }
  for (const auto& [id, n] : net.nodes()) {
    auto f = rep_fields(n.rep);
    f.insert(f.begin(), id);
    f.push_back(real(n.rank));
    f.push_back(encode_attributes(n.attributes));
    emit("NODE", id, f);
  }
  for (const auto& [id, l] : net.links()) {
    std::vector<std::string> f{id, l.source, l.type, l.target, real(l.weight)};
    if (l.is_explicit()) {
      f.push_back("E");
    } else {
      const auto& d = *l.derivation;
      f.insert(f.end(), {"D", d.rule, std::to_string(l.depth), encode_list(d.premises), encode_map(d.substitution)});
    }
    emit("LINK", id, f);
  }
  for (const auto& [id, r] : net.rules()) {
    auto f = rep_fields(r.rep);
    f.insert(f.begin(), id);
    f.push_back(encode_atoms(r.body));
    f.push_back(encode_atoms(r.head));
    emit("RULE", id, f);
  }
  for (const auto& d : state.space.dimensions()) {
    emit("DIM", d.name, {d.name, d.tree.root()});
    for (const auto& [id, n] : d.tree.nodes()) emit("CAT", id, {id, d.name, n.parent.value_or(""), n.name});
  }
  for (const auto& [id, n] : net.categories().nodes()) emit("CAT", id, {id, "", n.parent.value_or(""), n.name});
  for (const auto& [r, p] : state.space.placements()) emit("PLACE", r, {r, encode_map(p)});
  for (const auto& [id, c] : state.knowledge.concepts()) {
    std::vector<std::string> processes, media;
    for (const auto& p : c.processes) processes.push_back(encode_list(p));
    for (const auto& m : c.media) media.push_back(m.path);
    emit("CONCEPT", id,
         {id, c.name, encode_attributes(c.attributes), encode_list(c.classes), encode_list(c.instances),
          encode_pairs(c.relations), encode_list(c.interfaces), encode_list(processes), encode_list(c.use_cases),
          encode_list(c.objects), encode_list(c.events), encode_list(c.rules), encode_list(media),
          encode_list(c.language), c.priori ? "P" : "", c.link_type.value_or("")});
  }
  for (const auto& [word, cands] : state.lexicon.entries()) emit("LEXEME", word, {word, encode_list(cands)});
  for (const auto& [id, p] : state.problems) {
    emit("PROBLEM", id,
         {id, std::string(to_string(p.kind)), p.category.value_or(""), p.statement, encode_list(p.evidence),
          encode_list(p.concepts)});
  }
  for (const auto& [id, r] : state.anomaly_rules) {
    emit("ANOMALYRULE", id,
         {id, encode_atoms(r.condition), render_threshold(r.threshold), r.statement, r.category.value_or(""),
          encode_list(r.concepts)});
  }

  std::string out(kKsifHeader);
  out += '\n';
  for (const auto& kind : ksif_kinds()) {
    auto it = groups.find(kind);
    if (it == groups.end()) continue;
    std::sort(it->second.begin(), it->second.end());
    for (const auto& [key, line] : it->second) out += line;
  }
  return out;
}

// --- import --------------------------------------------------------------------------

namespace detail::ksif {

/// Applies a parsed document to `state`. `whole` means the document is the
/// complete state, so its derived links must be exactly the fixpoint.
inline void apply(KnowledgeState& state, const KsifDocument& doc, bool whole) {
  std::map<std::string, std::vector<const KsifRecord*>> by_kind;
  for (const auto& r : doc.records) by_kind[r.kind].push_back(&r);
  auto records = [&](const std::string& kind) -> const std::vector<const KsifRecord*>& {
    static const std::vector<const KsifRecord*> none;
    auto it = by_kind.find(kind);
    return it == by_kind.end() ? none : it->second;
  };
  static const std::map<std::string, std::size_t> arity{{"LINKTYPE", 7}, {"NODE", 7}, {"RULE", 7},
                                                        {"DIM", 2},      {"CAT", 4},  {"PLACE", 2},
                                                        {"CONCEPT", 16}, {"LEXEME", 2}, {"PROBLEM", 6},
                                                        {"ANOMALYRULE", 6}};
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& r : doc.records) {
    Reader rd{r};
    if (r.kind == "LINK") {
      if (r.fields.size() != 6 && r.fields.size() != 10) rd.fail(Errc::malformed_record, "LINK needs 6 or 10 fields");
    } else {
      rd.expect_fields(arity.at(r.kind));
    }
    std::string key = r.fields[0];
    if (r.kind == "CAT") key += '\x1f' + r.fields[1];
    if (!seen[r.kind].insert(key).second) rd.fail(Errc::duplicate_id, r.fields[0]);
  }

  Network& net = state.network();

  // link types
  {
    std::vector<std::pair<const KsifRecord*, LinkType>> items;
    for (const auto* r : records("LINKTYPE")) {
      Reader rd{*r};
      LinkType t;
      t.id = rd.id(0);
      t.rep = rd.rep(1);
      const auto& flags = r->fields[5];
      if (flags != "" && flags != "T" && flags != "S" && flags != "TS") rd.fail(Errc::malformed_record, "bad flags");
      t.transitive = flags.find('T') != std::string::npos;
      t.symmetric = flags.find('S') != std::string::npos;
      t.parent = rd.optional_id(6);
      if (net.has_link_type(t.id)) rd.fail(Errc::duplicate_id, t.id);
      items.emplace_back(r, std::move(t));
    }
    add_parent_first<LinkType>(
        std::move(items), [](const LinkType& t) { return t.parent.value_or(""); },
        [&](const LinkType& t) { net.add_link_type(t); },
        [&](const std::string& id) { return net.has_link_type(id); });
  }

  for (const auto* r : records("NODE")) {
    Reader rd{*r};
    at_line(*r, [&] { net.add_node_with_id(rd.id(0), rd.rep(1), rd.attributes(6), rd.real(5)); });
  }

  // semantic-space categories
  {
    struct Cat {
      std::string id, name, parent;
    };
    std::vector<std::pair<const KsifRecord*, Cat>> items;
    for (const auto* r : records("CAT")) {
      if (!r->fields[1].empty()) continue;
      Reader rd{*r};
      items.emplace_back(r, Cat{rd.id(0), r->fields[3], r->fields[2]});
      if (!r->fields[2].empty()) rd.id(2);
    }
    add_parent_first<Cat>(
        std::move(items), [](const Cat& c) { return c.parent; },
        [&](const Cat& c) {
          if (c.parent.empty()) {
            if (!net.categories().empty()) throw Error(Errc::multiple_roots, c.id);
            net.categories() = CategoryTree(c.id, c.name);
          } else {
            net.categories().add(c.id, c.name, c.parent);
          }
        },
        [&](const std::string& id) { return net.categories().contains(id); });
  }

  for (const auto* r : records("RULE")) {
    Reader rd{*r};
    Rule rule{rd.id(0), rd.rep(1), rd.atoms(5), rd.atoms(6)};
    at_line(*r, [&] {
      for (const auto& a : rule.body) {
        for (const auto* t : {&a.source, &a.target}) {
          if (!is_variable(*t) && is_valid_id(*t) && !net.has_node(*t)) throw Error(Errc::dangling_reference, *t);
        }
      }
      if (net.rules().count(rule.id)) throw Error(Errc::duplicate_id, rule.id);
      net.add_rule(rule);
    });
  }

  std::vector<const KsifRecord*> derived;
  for (const auto* r : records("LINK")) {
    Reader rd{*r};
    const auto& id = rd.id(0);
    const auto& s = rd.id(1);
    const auto& t = rd.id(2);
    const auto& o = rd.id(3);
    for (const auto* n : {&s, &o}) {
      if (!net.has_node(*n)) rd.fail(Errc::dangling_reference, *n);
    }
    if (!net.has_link_type(t)) rd.fail(Errc::dangling_reference, t);
    const double w = rd.real(4);
    if (r->fields[5] == "D") {
      if (r->fields.size() != 10) rd.fail(Errc::malformed_record, "derived LINK needs 10 fields");
      derived.push_back(r);
      continue;
    }
    if (r->fields[5] != "E" || r->fields.size() != 6) rd.fail(Errc::malformed_record, "LINK must be E or D");
    at_line(*r, [&] {
      if (auto existing = net.find(s, t, o); existing && net.link(*existing).is_explicit()) {
        throw Error(Errc::duplicate_id, id);
      }
      const auto got = net.assert_link(s, t, o, w);
      if (got != id) throw Error(Errc::malformed_record, "link id " + id + " does not match its content (" + got + ")");
    });
  }
  if (!derived.empty() && !net.materialized()) materialize(net);
  for (const auto* r : derived) {
    Reader rd{*r};
    const auto& id = r->fields[0];
    if (!net.has_link(id) || net.link(id).is_explicit()) rd.fail(Errc::malformed_record, "derived link " + id + " is not in the fixpoint");
    const auto& l = net.link(id);
    Derivation d{id, rd.id(6), {}, rd.id_list(8)};
    for (const auto& [var, value] : rd.pairs(9)) d.substitution[var] = value;
    const bool same = l.source == r->fields[1] && l.type == r->fields[2] && l.target == r->fields[3] &&
                      l.weight == rd.real(4) && l.depth == rd.count(7) && *l.derivation == d;
    if (!same) rd.fail(Errc::malformed_record, "derived link " + id + " differs from its canonical derivation");
  }
  if (whole && !derived.empty()) {
    std::size_t stored = 0;
    for (const auto& [id, l] : net.links()) stored += !l.is_explicit();
    if (stored != derived.size()) {
      throw Error(Errc::malformed_record, std::to_string(stored - derived.size()) + " derived links missing");
    }
  }

  // resource space
  {
    std::map<std::string, std::vector<std::pair<const KsifRecord*, CategoryNode>>> cats;
    for (const auto* r : records("CAT")) {
      if (r->fields[1].empty()) continue;
      Reader rd{*r};
      CategoryNode n{rd.id(0), r->fields[3], rd.optional_id(2)};
      cats[rd.id(1)].emplace_back(r, std::move(n));
    }
    std::vector<const KsifRecord*> dims = records("DIM");
    std::sort(dims.begin(), dims.end(), [](auto* a, auto* b) { return a->fields[0] < b->fields[0]; });
    for (const auto* r : dims) {
      Reader rd{*r};
      const auto& name = rd.id(0);
      const auto& root = rd.id(1);
      std::vector<CategoryNode> nodes;
      for (auto& [rec, n] : cats[name]) nodes.push_back(n);
      at_line(*r, [&] {
        auto tree = CategoryTree::from_nodes(nodes);
        if (tree.empty() || tree.root() != root) throw Error(Errc::malformed_record, "dimension " + name + " root mismatch");
        state.space.add_dimension({name, std::move(tree)});
      });
      cats.erase(name);
    }
    for (auto& [dim, items] : cats) {
      if (!state.space.has_dimension(dim)) throw Error(Errc::dangling_reference, dim, items.front().first->line);
      add_parent_first<CategoryNode>(
          std::move(items), [](const CategoryNode& n) { return n.parent.value_or(""); },
          [&, d = dim](const CategoryNode& n) {
            if (!n.parent) throw Error(Errc::multiple_roots, n.id);
            state.space.add_category(d, n.id, n.name, *n.parent);
          },
          [&, d = dim](const std::string& id) { return state.space.dimension(d).tree.contains(id); });
    }
    for (const auto* r : records("PLACE")) {
      Reader rd{*r};
      Point p;
      for (const auto& [dim, cat] : rd.pairs(1)) {
        if (!state.space.has_dimension(dim)) rd.fail(Errc::dangling_reference, dim);
        if (!state.space.dimension(dim).tree.contains(cat)) rd.fail(Errc::dangling_reference, cat);
        if (!p.emplace(dim, cat).second) rd.fail(Errc::malformed_record, "repeated coordinate " + dim);
      }
      at_line(*r, [&] { state.space.place(rd.id(0), p); });
    }
  }

  // concepts
  {
    std::vector<Concept> list;
    std::map<std::string, const KsifRecord*> where;
    for (const auto* r : records("CONCEPT")) {
      Reader rd{*r};
      Concept c;
      c.id = rd.id(0);
      c.name = r->fields[1];
      c.attributes = rd.attributes(2);
      c.classes = rd.id_list(3);
      c.instances = rd.id_list(4);
      c.relations = rd.pairs(5);
      c.interfaces = rd.list(6);
      for (const auto& p : rd.list(7)) c.processes.push_back(decode_list(p, r->line));
      c.use_cases = rd.list(8);
      c.objects = rd.id_list(9);
      c.events = rd.list(10);
      c.rules = rd.id_list(11);
      for (const auto& m : rd.list(12)) c.media.push_back(FileRef{m});
      c.language = rd.list(13);
      if (r->fields[14] != "" && r->fields[14] != "P") rd.fail(Errc::malformed_record, "bad concept flags");
      c.priori = r->fields[14] == "P";
      c.link_type = rd.optional_id(15);
      if (c.link_type && !net.has_link_type(*c.link_type)) rd.fail(Errc::dangling_reference, *c.link_type);
      if (state.knowledge.has_concept(c.id)) rd.fail(Errc::duplicate_id, c.id);
      where[c.id] = r;
      list.push_back(std::move(c));
    }
    for (const auto& c : list) {
      for (const auto& p : c.classes) {
        if (!where.count(p) && !state.knowledge.has_concept(p)) throw Error(Errc::dangling_reference, p, where[c.id]->line);
      }
    }
    try {
      state.knowledge.add_concepts(list);
    } catch (const Error& e) {
      std::size_t line = 0;
      for (const auto& [id, r] : where) {
        if (e.detail().find(id) != std::string::npos) line = r->line;
      }
      throw Error(e.code(), e.detail(), line ? std::optional<std::size_t>(line) : std::nullopt);
    }
    for (const auto& c : list) {
      for (const auto& [type, target] : c.relations) {
        if (!net.has_link_type(type)) throw Error(Errc::dangling_reference, type, where[c.id]->line);
        if (!state.knowledge.has_concept(target)) throw Error(Errc::dangling_reference, target, where[c.id]->line);
      }
    }
  }

  for (const auto* r : records("LEXEME")) {
    Reader rd{*r};
    auto cands = rd.id_list(1);
    for (const auto& c : cands) {
      if (!state.knowledge.has_concept(c)) rd.fail(Errc::dangling_reference, c);
    }
    at_line(*r, [&] { state.lexicon.add(r->fields[0], cands); });
  }

  for (const auto* r : records("PROBLEM")) {
    Reader rd{*r};
    Problem p;
    p.id = rd.id(0);
    auto kind = problem_kind_from(r->fields[1]);
    if (!kind) rd.fail(Errc::malformed_record, "bad problem kind '" + r->fields[1] + "'");
    p.kind = *kind;
    p.category = rd.optional_id(2);
    p.statement = r->fields[3];
    p.evidence = rd.list(4);
    p.concepts = rd.id_list(5);
    if (state.problems.count(p.id)) rd.fail(Errc::duplicate_id, p.id);
    state.problems.emplace(p.id, std::move(p));
  }

  for (const auto* r : records("ANOMALYRULE")) {
    Reader rd{*r};
    AnomalyRule a;
    a.id = rd.id(0);
    a.condition = rd.atoms(1);
    at_line(*r, [&] { a.threshold = parse_threshold(r->fields[2]); });
    a.statement = r->fields[3];
    a.category = rd.optional_id(4);
    a.concepts = rd.id_list(5);
    at_line(*r, [&] { validate_anomaly_rule(a); });
    if (state.anomaly_rules.count(a.id)) rd.fail(Errc::duplicate_id, a.id);
    state.anomaly_rules.emplace(a.id, std::move(a));
  }
}

}  // namespace detail::ksif

/// Rebuilds a state from KSIF text. Records may come in any order. When the
/// text carries derived links they must be exactly the fixpoint, and the
/// state comes back materialized.
inline KnowledgeState import_state(std::string_view text) {
  KnowledgeState state;
  detail::ksif::apply(state, parse_ksif(text), true);
  return state;
}

/// Adds the records of a KSIF fragment to `state`. All or nothing.
inline void ingest(KnowledgeState& state, std::string_view fragment) {
  const auto doc = parse_ksif(fragment);
  KnowledgeState next = state;
  detail::ksif::apply(next, doc, false);
  state = std::move(next);
}

}  // namespace ks
