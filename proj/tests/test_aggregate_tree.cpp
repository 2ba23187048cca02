#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "wum/aggregate_tree.hpp"

using namespace wum;

namespace {

// Every prefix of every sequence, counted directly.
oracle::FlatTree brute_aggregate(const std::vector<Sequence>& log) {
  oracle::FlatTree out;
  out[{}].hits = log.size();
  for (const auto& s : log) {
    for (std::size_t len = 1; len <= s.size(); ++len) {
      ++out[Sequence(s.begin(), s.begin() + static_cast<long>(len))].hits;
    }
    ++out[s].ends;
  }
  return out;
}

}  // namespace

TEST_CASE("catalog log aggregates into shared prefixes") {
  auto seqs = fixtures::catalog_sequences();
  auto t = build_aggregated_log(seqs);
  t.validate();
  CHECK(t.root().hits == 3);
  CHECK_FALSE(t.root().page.has_value());
  REQUIRE(t.root().children.size() == 1);
  const auto& a = t.node(t.root().children[0]);
  CHECK(a.page == PageOccurrence{"ParamA", 1});
  CHECK(a.hits == 3);
  REQUIRE(a.children.size() == 2);
  // canonical order: the LongList branch carries two sessions
  CHECK(t.node(a.children[0]).page == PageOccurrence{"LongList", 1});
  CHECK(t.node(a.children[0]).hits == 2);
  CHECK(t.node(a.children[1]).hits == 1);

  Sequence pre{{"ParamA", 1}, {"LongList", 1}};
  CHECK(prefix_hits(t, pre) == 2);
  CHECK(prefix_hits(t, Sequence{}) == 3);
  CHECK(prefix_hits(t, Sequence{{"LongList", 1}}) == 0);
  CHECK(prefix_hits(t, seqs[0]) == 1);
}

TEST_CASE("aggregated log equals brute-force prefix counts") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 200; ++round) {
    auto log = oracle::random_log(rng, 30, 4, 6);
    auto t = build_aggregated_log(log);
    t.validate();
    CHECK(oracle::flatten(t) == brute_aggregate(log));
    for (const auto& s : log) {
      std::uint64_t expected = 0;
      for (const auto& o : log) expected += (o.size() >= s.size() && std::equal(s.begin(), s.end(), o.begin())) ? 1 : 0;
      CHECK(prefix_hits(t, s) == expected);
    }
  }
}

TEST_CASE("insertion order does not change the normalized tree") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 50; ++round) {
    auto log = oracle::random_log(rng, 20, 3, 5);
    auto a = build_aggregated_log(log);
    std::shuffle(log.begin(), log.end(), rng);
    auto b = build_aggregated_log(log);
    CHECK(a == b);
  }
}

TEST_CASE("insert with multiplicity") {
  AggregateTree t;
  Sequence s{{"A", 1}, {"B", 1}};
  t.insert(s, 4);
  t.insert(Sequence{{"A", 1}});
  t.normalize();
  t.validate();
  CHECK(t.root().hits == 5);
  CHECK(prefix_hits(t, Sequence{{"A", 1}}) == 5);
  CHECK(prefix_hits(t, s) == 4);
  auto flat = oracle::flatten(t);
  CHECK(flat[Sequence{{"A", 1}}] == oracle::Counts{5, 1, 0});
  CHECK(flat[s] == oracle::Counts{4, 4, 0});
}

TEST_CASE("JSON round trip preserves counts and flags") {
  auto t = build_aggregated_log(fixtures::catalog_sequences());
  t.node(t.root().children[0]).completed = 2;
  t.node(t.root().children[0]).merged = true;
  auto back = AggregateTree::from_json(t.to_json());
  CHECK(back == t);
  CHECK(back.to_json(2) == t.to_json(2));
  CHECK(back.node(back.root().children[0]).merged);
}

TEST_CASE("malformed tree documents are rejected") {
  CHECK_THROWS_AS(AggregateTree::from_json("not json"), Error);
  CHECK_THROWS_AS(AggregateTree::from_json("{\"hits\":1,\"ends\":0,\"children\":[{\"hits\":1}]}"), Error);
  CHECK_THROWS_AS(AggregateTree::from_json("[1,2]"), Error);
}

TEST_CASE("validate reports count violations") {
  AggregateTree t;
  auto c = t.child(AggregateTree::root_id, {"A", 1});
  t.node(c).hits = 3;
  t.root().hits = 2;
  CHECK_THROWS_AS(t.validate(), Error);
  t.root().hits = 3;
  t.validate();
  t.node(c).ends = 4;
  CHECK_THROWS_AS(t.validate(), Error);
  t.node(c).ends = 0;
  t.child(c, {"B", 1});
  CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("visit walks nodes in pre-order with depth") {
  auto t = build_aggregated_log(fixtures::catalog_sequences());
  std::size_t count = 0;
  std::size_t max_depth = 0;
  t.visit([&](AggregateTree::NodeId, const AggregateTree::Node&, std::size_t d) {
    ++count;
    max_depth = std::max(max_depth, d);
  });
  CHECK(count == t.node_count());
  CHECK(max_depth == 5);
}
