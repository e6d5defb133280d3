#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>

#include "generators.hpp"
#include "ksengine/network.hpp"
#include "oracles.hpp"

namespace {

ks::Network table_links() {
  ks::Network net;
  for (auto [id, word] : {std::pair{"L_1", "Greater"}, {"L_2", "Equal"}, {"L_3", "Publish"},
                          {"L_4", "Cite"}}) {
    net.add_link_type({id, ks::make_rep(word), false, false, std::nullopt});
  }
  return net;
}

ks::Network::ConnectionIndex brute_index(const ks::Network& net) {
  ks::Network::ConnectionIndex idx;
  for (const auto& [id, l] : net.links()) idx[{l.source, l.target}].insert(id);
  return idx;
}

TEST(AddNode, TableTwoRowOne) {
  ks::Network net;
  auto rep = ks::make_rep("Turing", "British mathematician, pioneer of computer science",
                          {"Turing-machine", "Turing-test"});
  net.add_node_with_id("N_1", rep);
  EXPECT_EQ(net.node("N_1").rep.word, "Turing");
  EXPECT_EQ(net.node("N_1").rep.rep_k.size(), 2u);
  EXPECT_EQ(net.node("N_1").rank, 0.0);
}

TEST(AddNode, SingletonNetwork) {
  ks::Network net;
  const auto id = net.add_node(ks::make_rep("X"));
  EXPECT_EQ(net.nodes().size(), 1u);
  EXPECT_TRUE(net.has_node(id));
}

TEST(AddNode, EmptyWordRejected) {
  ks::Network net;
  try {
    net.add_node(ks::make_rep(""));
    FAIL();
  } catch (const ks::Error& e) {
    EXPECT_EQ(e.code(), ks::Errc::invalid_rep);
  }
}

TEST(AddNode, FileReferencesAreNotAttributes) {
  ks::Network net;
  EXPECT_THROW(net.add_node(ks::make_rep("x"), {{"f", ks::FileRef{"a.txt"}}}), ks::Error);
}

TEST(AddNode, HundredDistinctIdsAgreeWithSetOracle) {
  ks::Network net;
  std::set<std::string> seen;
  std::map<std::string, std::string> word_of;
  for (int i = 0; i < 100; ++i) {
    const std::string word = "w" + std::to_string(i);
    auto id = net.add_node(ks::make_rep(word));
    EXPECT_TRUE(seen.insert(id).second);
    word_of[id] = word;
  }
  EXPECT_EQ(net.nodes().size(), 100u);
  for (const auto& [id, word] : word_of) EXPECT_EQ(net.node(id).rep.word, word);
  // Engine-assigned ids sort in creation order.
  EXPECT_TRUE(std::is_sorted(word_of.begin(), word_of.end(), [](auto& a, auto& b) {
    return std::stoi(a.second.substr(1)) < std::stoi(b.second.substr(1));
  }));
}

TEST(AssertLink, CiteBetweenPapers) {
  auto net = table_links();
  net.add_node_with_id("paperA", ks::make_rep("A"));
  net.add_node_with_id("paperB", ks::make_rep("B"));
  net.assert_link("paperA", "L_4", "paperB", 1);
  auto between = net.links_between("paperA", "paperB");
  ASSERT_EQ(between.size(), 1u);
  EXPECT_EQ(between[0].type, "L_4");
  EXPECT_TRUE(between[0].is_explicit());
  EXPECT_TRUE(net.links_between("paperB", "paperA").empty());
}

TEST(AssertLink, Errors) {
  auto net = table_links();
  net.add_node_with_id("a", ks::make_rep("a"));
  net.add_node_with_id("b", ks::make_rep("b"));
  net.assert_link("a", "L_4", "b");
  auto code = [&](auto&& fn) {
    try {
      fn();
    } catch (const ks::Error& e) {
      return e.code();
    }
    return ks::Errc::io;
  };
  EXPECT_EQ(code([&] { net.assert_link("a", "L_4", "b"); }), ks::Errc::duplicate_explicit_link);
  EXPECT_EQ(code([&] { net.assert_link("a", "L_9", "b"); }), ks::Errc::unknown_link_type);
  EXPECT_EQ(code([&] { net.assert_link("a", "L_4", "zz"); }), ks::Errc::unknown_node);
  EXPECT_EQ(code([&] { net.assert_link("b", "L_4", "a", -1); }), ks::Errc::negative_weight);
}

TEST(AssertLink, SymmetricCompletedAtQueryTime) {
  ks::Network net;
  net.add_link_type({"Sib", ks::make_rep("sibling"), false, true, std::nullopt});
  net.add_node_with_id("a", ks::make_rep("a"));
  net.add_node_with_id("b", ks::make_rep("b"));
  net.assert_link("b", "Sib", "a");
  EXPECT_EQ(net.links().size(), 1u);
  EXPECT_EQ(net.links_between("a", "b").size(), 1u);
  EXPECT_EQ(net.answer_query(ks::parse_query("(a, Sib, ?)")), std::vector<std::string>{"b"});
  EXPECT_EQ(net.answer_query(ks::parse_query("(?, Sib, b)")), std::vector<std::string>{"a"});
  EXPECT_THROW(net.assert_link("a", "Sib", "b"), ks::Error);
}

TEST(RetractLink, OnlyLinkLeavesEmptyNetwork) {
  auto net = table_links();
  net.add_node_with_id("a", ks::make_rep("a"));
  auto id = net.assert_link("a", "L_2", "a");
  net.retract_link(id);
  EXPECT_TRUE(net.links().empty());
  EXPECT_TRUE(net.connection_index().empty());
  EXPECT_THROW(net.retract_link(id), ks::Error);
}

TEST(RetractLink, ReassertRestoresOriginal) {
  auto net = table_links();
  for (auto n : {"a", "b", "c"}) net.add_node_with_id(n, ks::make_rep(n));
  net.assert_link("a", "L_4", "b", 2);
  const auto id = net.assert_link("b", "L_4", "c", 3);
  const ks::Network before = net;
  net.retract_link(id);
  net.assert_link("b", "L_4", "c", 3);
  EXPECT_EQ(net, before);
}

TEST(LinksBetween, FreshNodesHaveNone) {
  ks::Network net;
  auto a = net.add_node(ks::make_rep("a"));
  auto b = net.add_node(ks::make_rep("b"));
  EXPECT_TRUE(net.links_between(a, b).empty());
  EXPECT_THROW(net.links_between(a, "nope"), ks::Error);
}

TEST(LinksBetween, RandomAgreesWithBruteForceScan) {
  gen::Rng rng(11);
  for (int round = 0; round < 30; ++round) {
    ks::Network net;
    for (int i = 0; i < 6; ++i) net.add_node_with_id(gen::node_name(i), ks::make_rep("n"));
    for (int t = 0; t < 3; ++t) net.add_link_type({gen::type_name(t), ks::make_rep("t"), false, false, {}});
    for (int i = 0; i < 20; ++i) {
      auto s = gen::node_name(gen::uniform(rng, 0, 5));
      auto t = gen::type_name(gen::uniform(rng, 0, 2));
      auto o = gen::node_name(gen::uniform(rng, 0, 5));
      if (!net.find(s, t, o)) net.assert_link(s, t, o);
    }
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        std::set<std::string> expect;
        for (const auto& [id, l] : net.links()) {
          if (l.source == gen::node_name(a) && l.target == gen::node_name(b)) expect.insert(id);
        }
        std::set<std::string> got;
        for (const auto& l : net.links_between(gen::node_name(a), gen::node_name(b))) got.insert(l.id);
        EXPECT_EQ(got, expect);
      }
    }
    EXPECT_EQ(net.connection_index(), brute_index(net));
  }
}

TEST(AnswerQuery, Shapes) {
  auto net = table_links();
  for (auto n : {"A", "B", "C"}) net.add_node_with_id(n, ks::make_rep(n));
  net.assert_link("A", "L_4", "C");
  net.assert_link("B", "L_4", "C");
  EXPECT_EQ(net.answer_query(ks::parse_query("(A, ?, C)")), std::vector<std::string>{"L_4"});
  EXPECT_EQ(net.answer_query(ks::parse_query("(?, L_4, C)")), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(net.answer_query(ks::parse_query("(A, L_4, ?)")), std::vector<std::string>{"C"});
  EXPECT_TRUE(net.answer_query(ks::parse_query("(C, ?, A)")).empty());
}

TEST(AnswerQuery, MalformedPatterns) {
  for (auto bad : {"A, ?, C", "(?, ?, C)", "(A, L_4, C)", "(A, ?)", "(A, ?, C, D)", "(a b, ?, c)"}) {
    try {
      ks::parse_query(bad);
      ADD_FAILURE() << bad;
    } catch (const ks::Error& e) {
      EXPECT_EQ(e.code(), ks::Errc::malformed_pattern) << bad;
    }
  }
  ks::QueryPattern type_and_source_hole{std::nullopt, std::nullopt, std::string("C")};
  ks::Network net;
  EXPECT_THROW(net.answer_query(type_and_source_hole), ks::Error);
}

TEST(AnswerQuery, RandomAgreesWithEnumeration) {
  gen::Rng rng(5);
  for (int round = 0; round < 40; ++round) {
    auto net = gen::random_network(rng);
    ks::materialize(net);
    const auto facts = oracle::answerable(net);
    for (const auto& [nid, n] : net.nodes()) {
      for (const auto& [mid, m] : net.nodes()) {
        std::set<std::string> expect;
        for (const auto& [s, t, o] : facts) {
          if (s == nid && o == mid) expect.insert(t);
        }
        auto got = net.answer_query({nid, std::nullopt, mid});
        EXPECT_EQ(std::set<std::string>(got.begin(), got.end()), expect);
      }
      for (const auto& [tid, t] : net.link_types()) {
        std::set<std::string> fwd, back;
        for (const auto& [s, ty, o] : facts) {
          if (ty != tid) continue;
          if (s == nid) fwd.insert(o);
          if (o == nid) back.insert(s);
        }
        auto got_f = net.answer_query({nid, tid, std::nullopt});
        auto got_b = net.answer_query({std::nullopt, tid, nid});
        EXPECT_EQ(std::set<std::string>(got_f.begin(), got_f.end()), fwd);
        EXPECT_EQ(std::set<std::string>(got_b.begin(), got_b.end()), back);
        EXPECT_TRUE(std::is_sorted(got_f.begin(), got_f.end()));
      }
    }
  }
}

TEST(Ranks, EmptyNetwork) {
  ks::Network net;
  EXPECT_TRUE(net.recompute_ranks().empty());
}

TEST(Ranks, SingleLinkForcesAllRankOnTarget) {
  auto net = table_links();
  net.add_node_with_id("A", ks::make_rep("A"));
  net.add_node_with_id("B", ks::make_rep("B"));
  net.assert_link("A", "L_4", "B", 1);
  auto r = net.recompute_ranks();
  EXPECT_EQ(r["A"], 0.0);
  EXPECT_EQ(r["B"], 1.0);
  EXPECT_EQ(net.node("B").rank, 1.0);
}

TEST(Ranks, UniformWithoutLinks) {
  ks::Network net;
  for (int i = 0; i < 4; ++i) net.add_node(ks::make_rep("x"));
  for (const auto& [id, r] : net.recompute_ranks()) EXPECT_DOUBLE_EQ(r, 0.25);
}

TEST(Ranks, RandomWeightedMatchesArithmetic) {
  gen::Rng rng(3);
  for (int round = 0; round < 50; ++round) {
    auto net = gen::random_network(rng);
    std::map<std::string, double> in;
    double total = 0;
    for (const auto& [id, l] : net.links()) {
      in[l.target] += l.weight;
      total += l.weight;
    }
    auto ranks = net.recompute_ranks();
    double sum = 0;
    for (const auto& [id, r] : ranks) {
      const double expect = total > 0 ? in[id] / total : 1.0 / net.nodes().size();
      EXPECT_NEAR(r, expect, 1e-12);
      EXPECT_GE(r, 0.0);
      EXPECT_LE(r, 1.0);
      sum += r;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Network, IdenticalOperationSequencesAreEqual) {
  auto build = [] {
    gen::Rng rng(99);
    auto net = gen::random_network(rng);
    ks::materialize(net);
    return net;
  };
  EXPECT_EQ(build(), build());
}

}  // namespace
