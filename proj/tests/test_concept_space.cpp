#include <gtest/gtest.h>

#include "generators.hpp"
#include "ksengine/concept_space.hpp"

namespace {

ks::Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const ks::Error& e) {
    return e.code();
  }
  return ks::Errc::io;
}

ks::Concept make_concept(const std::string& id, std::optional<std::string> link_type = std::nullopt) {
  ks::Concept c;
  c.id = id;
  c.name = id;
  c.link_type = std::move(link_type);
  return c;
}

ks::LinkType plain_type(const std::string& id) {
  ks::LinkType t;
  t.id = id;
  t.rep = ks::make_rep(id);
  return t;
}

std::set<std::pair<std::string, std::string>> class_links(const ks::ConceptSpace& s) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& [id, c] : s.concepts()) {
    for (const auto& p : c.classes) out.emplace(id, p);
  }
  return out;
}

TEST(ImportHierarchy, ThreeNodeTree) {
  ks::ConceptSpace s;
  ks::CategoryTree t("thing", "thing");
  t.add("agent", "agent", "thing");
  t.add("artifact", "artifact", "thing");
  auto ids = ks::import_category_hierarchy(s, t);
  EXPECT_EQ(ids.size(), 3u);
  EXPECT_EQ(s.concepts().size(), 3u);
  EXPECT_EQ(class_links(s).size(), 2u);
  EXPECT_TRUE(s.concept_at("thing").priori);
  EXPECT_TRUE(s.network().has_node("agent"));
}

TEST(ImportHierarchy, SingleRoot) {
  ks::ConceptSpace s;
  ks::import_category_hierarchy(s, ks::CategoryTree("thing", "thing"));
  EXPECT_EQ(s.concepts().size(), 1u);
  EXPECT_TRUE(class_links(s).empty());
}

TEST(ImportHierarchy, SerializedErrors) {
  ks::ConceptSpace s;
  EXPECT_EQ(code_of([&] {
              ks::import_category_hierarchy(s, std::vector<ks::CategoryNode>{{"a", "a", std::nullopt},
                                                                             {"b", "b", std::nullopt}});
            }),
            ks::Errc::multiple_roots);
  EXPECT_EQ(code_of([&] {
              ks::import_category_hierarchy(s, std::vector<ks::CategoryNode>{{"a", "a", std::string("b")},
                                                                             {"b", "b", std::string("a")}});
            }),
            ks::Errc::malformed_tree);
  EXPECT_TRUE(s.concepts().empty());
}

TEST(ImportHierarchy, RandomTreesMatchParentRelation) {
  gen::Rng rng(11);
  for (int round = 0; round < 50; ++round) {
    auto tree = gen::random_tree(rng, "k", gen::uniform(rng, 0, 3), 3);
    if (tree.size() > 30) continue;
    ks::ConceptSpace s;
    ks::import_category_hierarchy(s, tree);
    std::set<std::pair<std::string, std::string>> expect;
    for (const auto& [id, n] : tree.nodes()) {
      if (n.parent) expect.emplace(id, *n.parent);
    }
    EXPECT_EQ(class_links(s), expect);
    EXPECT_TRUE(s.classes_acyclic());
  }
}

TEST(Generalize, DisjointAttributes) {
  ks::ConceptSpace s;
  auto a = make_concept("a");
  a.attributes["color"] = std::string("red");
  auto b = make_concept("b");
  b.attributes["size"] = std::int64_t{3};
  s.add_concept(a);
  s.add_concept(b);
  const auto g = ks::generalize_concepts(s, {"a", "b"});
  EXPECT_TRUE(s.concept_at(g).attributes.empty());
  EXPECT_EQ(s.concept_at("a").classes, std::vector<std::string>{g});
  EXPECT_EQ(s.concept_at("b").classes, std::vector<std::string>{g});
  EXPECT_TRUE(s.network().has_node(g));
}

TEST(Generalize, IdenticalAttributes) {
  ks::ConceptSpace s;
  ks::Attributes attrs{{"color", std::string("red")}, {"mass", 2.5}};
  for (auto id : {"a", "b", "c"}) {
    auto c = make_concept(id);
    c.attributes = attrs;
    s.add_concept(c);
  }
  EXPECT_EQ(s.concept_at(ks::generalize_concepts(s, {"a", "b", "c"})).attributes, attrs);
}

TEST(Generalize, Errors) {
  ks::ConceptSpace s;
  s.add_concept(make_concept("a"));
  EXPECT_EQ(code_of([&] { ks::generalize_concepts(s, {"a"}); }), ks::Errc::too_few_concepts);
  EXPECT_EQ(code_of([&] { ks::generalize_concepts(s, {"a", "a"}); }), ks::Errc::too_few_concepts);
  EXPECT_EQ(code_of([&] { ks::generalize_concepts(s, {"a", "zz"}); }), ks::Errc::unknown_concept);
}

TEST(Generalize, RandomMatchesPairwiseIntersection) {
  gen::Rng rng(12);
  for (int round = 0; round < 100; ++round) {
    ks::ConceptSpace s;
    const std::size_t n = gen::uniform(rng, 2, 5);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      auto c = make_concept("c" + std::to_string(i));
      for (int k = 0; k < 5; ++k) {
        if (gen::coin(rng, 0.7)) c.attributes["l" + std::to_string(k)] = std::int64_t(gen::uniform(rng, 0, 1));
      }
      ids.push_back(c.id);
      s.add_concept(c);
    }
    ks::Attributes expect;
    for (const auto& [label, value] : s.concept_at(ids[0]).attributes) {
      bool everywhere = true;
      for (const auto& id : ids) {
        const auto& other = s.concept_at(id).attributes;
        if (!other.count(label) || other.at(label) != value) everywhere = false;
      }
      if (everywhere) expect[label] = value;
    }
    const auto g = ks::generalize_concepts(s, ids);
    EXPECT_EQ(s.concept_at(g).attributes, expect);
    EXPECT_TRUE(s.classes_acyclic());
  }
}

TEST(Enrich, DuplicateAttributeStoredOnce) {
  ks::ConceptSpace s;
  s.add_concept(make_concept("a"));
  ks::enrich_concept(s, "a", {{"attributes", "color", std::string("red")}, {"attributes", "color", std::string("red")}});
  EXPECT_EQ(s.concept_at("a").attributes.size(), 1u);
}

TEST(Enrich, InstanceAndErrors) {
  ks::ConceptSpace s;
  s.add_concept(make_concept("a"));
  s.network().add_node_with_id("x1", ks::make_rep("x1"));
  ks::enrich_concept(s, "a", {{"instances", "x1"}});
  EXPECT_EQ(s.concept_at("a").instances, std::vector<std::string>{"x1"});
  EXPECT_TRUE(s.unresolved_references().empty());
  ks::enrich_concept(s, "a", {{"objects", "ghost"}});
  EXPECT_EQ(s.unresolved_references(), std::vector<std::string>{"a: ghost"});
  EXPECT_EQ(code_of([&] { ks::enrich_concept(s, "zz", {}); }), ks::Errc::unknown_concept);
  EXPECT_EQ(code_of([&] { ks::enrich_concept(s, "a", {{"smell", "x"}}); }), ks::Errc::unknown_compartment);
}

TEST(Enrich, ClassCycleRejected) {
  ks::ConceptSpace s;
  s.add_concept(make_concept("a"));
  auto b = make_concept("b");
  b.classes = {"a"};
  s.add_concept(b);
  EXPECT_EQ(code_of([&] { ks::enrich_concept(s, "a", {{"classes", "b"}}); }), ks::Errc::cycle);
  EXPECT_TRUE(s.concept_at("a").classes.empty());
}

TEST(Enrich, RandomEqualsDedupFold) {
  gen::Rng rng(13);
  const std::vector<std::string> compartments{"attributes", "instances", "interfaces", "processes",
                                              "use_cases",  "events",    "language",   "media"};
  for (int round = 0; round < 20; ++round) {
    ks::ConceptSpace s;
    s.add_concept(make_concept("a"));
    std::vector<ks::Enrichment> records;
    for (int i = 0; i < 50; ++i) {
      ks::Enrichment e;
      e.compartment = gen::pick(rng, compartments);
      e.key = "k" + std::to_string(gen::uniform(rng, 0, 4));
      e.value = std::int64_t(gen::uniform(rng, 0, 2));
      if (e.compartment == "processes") e.steps = {e.key, "s" + std::to_string(gen::uniform(rng, 0, 1))};
      records.push_back(e);
    }
    // Fold by hand: scan each compartment, keep first occurrences in order.
    ks::Concept expect = s.concept_at("a");
    for (const auto& r : records) {
      auto add = [](auto& v, auto item) {
        for (const auto& x : v) {
          if (x == item) return;
        }
        v.push_back(item);
      };
      if (r.compartment == "attributes") expect.attributes[r.key] = r.value;
      if (r.compartment == "instances") add(expect.instances, r.key);
      if (r.compartment == "interfaces") add(expect.interfaces, r.key);
      if (r.compartment == "processes") add(expect.processes, r.steps);
      if (r.compartment == "use_cases") add(expect.use_cases, r.key);
      if (r.compartment == "events") add(expect.events, r.key);
      if (r.compartment == "language") add(expect.language, r.key);
      if (r.compartment == "media") add(expect.media, ks::FileRef{r.key});
    }
    std::size_t split = gen::uniform(rng, 0, records.size());
    ks::enrich_concept(s, "a", {records.begin(), records.begin() + static_cast<long>(split)});
    ks::enrich_concept(s, "a", {records.begin() + static_cast<long>(split), records.end()});
    EXPECT_EQ(s.concept_at("a"), expect);
  }
}

// --- reading ---------------------------------------------------------------

ks::ConceptSpace publishing_space() {
  ks::ConceptSpace s;
  s.network().add_link_type(plain_type("Publish"));
  s.add_concept(make_concept("Bush"));
  s.add_concept(make_concept("paper"));
  s.add_concept(make_concept("publish", "Publish"));
  return s;
}

TEST(Read, EmptyTokensLeaveNetworkUnchanged) {
  auto s = publishing_space();
  const auto before = s;
  ks::Lexicon lex;
  lex.add("paper", {"paper"});
  auto trace = ks::read_text(s, {}, lex, {}, 3);
  EXPECT_EQ(s, before);
  EXPECT_TRUE(trace.resolved.empty());
}

TEST(Read, RelationWordLinksNeighbours) {
  auto s = publishing_space();
  ks::Lexicon lex;
  lex.add("Bush", {"Bush"});
  lex.add("publish", {"publish"});
  lex.add("paper", {"paper"});
  auto trace = ks::read_text(s, {"Bush", "publish", "paper"}, lex, {}, 3);
  std::size_t publish_links = 0;
  for (const auto& [id, l] : s.network().links()) {
    if (l.type == "Publish") {
      ++publish_links;
      EXPECT_EQ(l.source, "Bush");
      EXPECT_EQ(l.target, "paper");
    }
  }
  EXPECT_EQ(publish_links, 1u);
  ASSERT_EQ(trace.relations.size(), 1u);
  EXPECT_EQ(trace.relations[0].position, 1u);
  EXPECT_EQ(s.concept_at("Bush").relations,
            (std::vector<std::pair<std::string, std::string>>{{"Publish", "paper"}}));
}

TEST(Read, UnknownTokensSkippedAndRadiusChecked) {
  auto s = publishing_space();
  ks::Lexicon lex;
  lex.add("paper", {"paper"});
  auto trace = ks::read_text(s, {"the", "paper", "is", "long"}, lex, {}, 1);
  EXPECT_EQ(trace.skipped, (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(code_of([&] { ks::read_text(s, {"paper"}, lex, {}, 0); }), ks::Errc::non_positive_input);
  EXPECT_EQ(code_of([&] { ks::read_text(s, {"paper"}, lex, {"zz"}, 1); }), ks::Errc::unknown_concept);
}

TEST(Read, GoalsSteerDisambiguation) {
  ks::ConceptSpace s;
  s.network().add_link_type(plain_type("Rel"));
  for (auto id : {"bank_river", "bank_money", "water", "loan"}) s.add_concept(make_concept(id));
  s.network().assert_link("bank_money", "Rel", "loan");
  s.network().assert_link("water", "Rel", "bank_river");
  ks::Lexicon lex;
  lex.add("bank", {"bank_money", "bank_river"});
  EXPECT_EQ(ks::read_text(s, {"bank"}, lex, {"water"}, 2).resolved.at(0).concept_id, "bank_river");
  EXPECT_EQ(ks::read_text(s, {"bank"}, lex, {"loan"}, 2).resolved.at(0).concept_id, "bank_money");
  // no evidence either way: lexicon order decides
  EXPECT_EQ(ks::read_text(s, {"bank"}, lex, {}, 2).resolved.at(0).concept_id, "bank_money");
}

TEST(Read, PrioriConceptsUntouched) {
  ks::ConceptSpace s;
  ks::CategoryTree t("thing", "thing");
  t.add("agent", "agent", "thing");
  t.add("artifact", "artifact", "thing");
  ks::import_category_hierarchy(s, t);
  const auto before = s.concepts();
  ks::Lexicon lex;
  lex.add("agent", {"agent"});
  lex.add("tool", {"artifact"});
  ks::read_text(s, {"agent", "tool", "agent", "tool"}, lex, {"thing"}, 2);
  EXPECT_EQ(s.concepts(), before);
}

struct Text {
  std::vector<std::string> tokens;
  ks::Lexicon lexicon;
};

// Vocabulary of 12 entity words (one candidate each), 2 relation words and
// filler words without entries.
Text random_text(gen::Rng& rng, std::size_t length) {
  Text t;
  for (int i = 0; i < 12; ++i) t.lexicon.add("w" + std::to_string(i), {"c" + std::to_string(i)});
  t.lexicon.add("rel0", {"r0"});
  t.lexicon.add("rel1", {"r1"});
  for (std::size_t i = 0; i < length; ++i) {
    const auto roll = gen::uniform(rng, 0, 19);
    if (roll < 14) {
      t.tokens.push_back("w" + std::to_string(gen::uniform(rng, 0, 11)));
    } else if (roll < 16) {
      t.tokens.push_back("rel" + std::to_string(roll - 14));
    } else {
      t.tokens.push_back("filler");
    }
  }
  return t;
}

ks::ConceptSpace reading_space() {
  ks::ConceptSpace s;
  s.network().add_link_type(plain_type("Rel0"));
  s.network().add_link_type(plain_type("Rel1"));
  for (int i = 0; i < 12; ++i) s.add_concept(make_concept("c" + std::to_string(i)));
  s.add_concept(make_concept("r0", "Rel0"));
  s.add_concept(make_concept("r1", "Rel1"));
  return s;
}

// Brute-force window count straight from the tokens: for each entity token,
// each distinct other entity concept appearing among the previous `radius`
// tokens adds one to that pair.
std::map<std::pair<std::string, std::string>, double> window_counts(const std::vector<std::string>& tokens,
                                                                     std::size_t radius) {
  std::map<std::pair<std::string, std::string>, double> out;
  auto entity = [&](std::size_t i) -> std::string {
    const auto& w = tokens[i];
    return w.size() > 1 && w[0] == 'w' ? "c" + w.substr(1) : std::string();
  };
  for (std::size_t q = 0; q < tokens.size(); ++q) {
    const auto cq = entity(q);
    if (cq.empty()) continue;
    std::set<std::string> seen;
    for (std::size_t p = (q >= radius ? q - radius : 0); p < q; ++p) {
      const auto cp = entity(p);
      if (!cp.empty() && cp != cq) seen.insert(cp);
    }
    for (const auto& cp : seen) out[{std::min(cp, cq), std::max(cp, cq)}] += 1.0;
  }
  return out;
}

TEST(Read, RandomTextsMatchWindowOracle) {
  gen::Rng rng(14);
  for (int round = 0; round < 20; ++round) {
    const std::size_t radius = gen::uniform(rng, 1, 4);
    auto text = random_text(rng, gen::uniform(rng, 0, 200));
    auto s = reading_space();
    auto trace = ks::read_text(s, text.tokens, text.lexicon, {}, radius);

    std::map<std::pair<std::string, std::string>, double> got;
    for (const auto& [id, l] : s.network().links()) {
      if (l.type == ks::kCoOccur) got[{std::min(l.source, l.target), std::max(l.source, l.target)}] = l.weight;
    }
    EXPECT_EQ(got, window_counts(text.tokens, radius));
    for (const auto& a : trace.co_activations) {
      EXPECT_LE(a.position - a.partner_position, 2 * radius);
    }

    auto again = reading_space();
    EXPECT_EQ(ks::read_text(again, text.tokens, text.lexicon, {}, radius), trace);
    EXPECT_EQ(again, s);
  }
}

TEST(Read, AmbiguousLexiconIsDeterministic) {
  gen::Rng rng(15);
  for (int round = 0; round < 10; ++round) {
    auto s = reading_space();
    ks::Lexicon lex;
    for (int i = 0; i < 6; ++i) {
      lex.add("w" + std::to_string(i), {"c" + std::to_string(gen::uniform(rng, 0, 11)),
                                        "c" + std::to_string(gen::uniform(rng, 0, 11))});
    }
    std::vector<std::string> tokens;
    for (int i = 0; i < 120; ++i) tokens.push_back("w" + std::to_string(gen::uniform(rng, 0, 5)));
    auto copy = s;
    auto t1 = ks::read_text(s, tokens, lex, {"c1"}, 3);
    auto t2 = ks::read_text(copy, tokens, lex, {"c1"}, 3);
    EXPECT_EQ(t1, t2);
    EXPECT_EQ(s, copy);
  }
}

}  // namespace
