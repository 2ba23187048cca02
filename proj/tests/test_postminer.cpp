#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "wum/miner.hpp"
#include "wum/postminer.hpp"

using namespace wum;

namespace {

using C = oracle::Counts;

AggregateTree::NodeId add(AggregateTree& t, AggregateTree::NodeId parent, const char* page, std::uint64_t hits,
                          std::uint64_t ends, std::uint64_t completed = 0) {
  AggregateTree::Node n;
  n.page = PageOccurrence{page, 1};
  n.hits = hits;
  n.ends = ends;
  n.completed = completed;
  return t.add_child(parent, n);
}

AggregateTree spliced_fixture() {
  AggregateTree t(PageOccurrence{"R", 1});
  t.root().hits = 10;
  auto a = add(t, AggregateTree::root_id, "A", 1, 0);
  add(t, a, "T", 1, 1, 1);
  auto b = add(t, AggregateTree::root_id, "B", 1, 0);
  add(t, b, "T", 1, 1, 1);
  add(t, AggregateTree::root_id, "C", 8, 8);
  t.normalize();
  t.validate();
  return t;
}

struct Stats {
  std::uint64_t ends = 0;
  std::uint64_t completed = 0;
};

Stats totals(const AggregateTree& t) {
  Stats s;
  t.visit([&](AggregateTree::NodeId, const AggregateTree::Node& n, std::size_t) {
    s.ends += n.ends;
    s.completed += n.completed;
  });
  return s;
}

std::vector<AggregateTree> random_trees(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<AggregateTree> out;
  while (out.size() < count) {
    auto log = oracle::random_log(rng, 60, 6, 8);
    if (out.size() % 2 == 0) {
      out.push_back(build_aggregated_log(log));
      continue;
    }
    auto g = oracle::random_gsequence(rng, log, 6, 3, 4);
    auto p = build_pattern(g, std::span<const Sequence>(log));
    if (p.trees[0].root().hits > 0) out.push_back(p.trees[0]);
  }
  return out;
}

}  // namespace

TEST_CASE("rare inner nodes are spliced and same-page siblings merged") {
  auto out = prune_and_merge(spliced_fixture(), PostMinerConfig::absolute(2));
  out.validate();
  auto flat = oracle::flatten(out);
  oracle::FlatTree expected{
      {{{"R", 1}}, C{10, 0, 0}},
      {{{"R", 1}, {"C", 1}}, C{8, 8, 0}},
      {{{"R", 1}, {"T", 1}}, C{2, 2, 2}},
  };
  CHECK(flat == expected);
  REQUIRE(out.root().children.size() == 2);
  CHECK(out.node(out.root().children[0]).page == PageOccurrence{"C", 1});
  CHECK_FALSE(out.node(out.root().children[0]).merged);
  CHECK(out.node(out.root().children[1]).merged);
}

TEST_CASE("threshold one leaves a canonical tree unchanged") {
  auto t = spliced_fixture();
  CHECK(prune_and_merge(t, PostMinerConfig::absolute(1)) == t);
}

TEST_CASE("threshold above every node keeps only the root") {
  auto out = prune_and_merge(spliced_fixture(), PostMinerConfig::absolute(11));
  CHECK(out.node_count() == 1);
  CHECK(out.root().hits == 10);
}

TEST_CASE("fractional thresholds round up against the root") {
  CHECK(PostMinerConfig::fraction(Ratio{1, 10}).absolute_for(10) == 1);
  CHECK(PostMinerConfig::fraction(Ratio{1, 10}).absolute_for(11) == 2);
  CHECK(PostMinerConfig::fraction(Ratio{1, 100}).absolute_for(0) == 1);
  CHECK(PostMinerConfig::absolute(7).absolute_for(1000) == 7);
  auto t = spliced_fixture();
  CHECK(prune_and_merge(t, PostMinerConfig::fraction(Ratio{15, 100})) ==
        prune_and_merge(t, PostMinerConfig::absolute(2)));
}

TEST_CASE("threshold parsing and validation") {
  CHECK(std::get<std::uint64_t>(PostMinerConfig::parse("12").thr) == 12);
  CHECK(std::get<Ratio>(PostMinerConfig::parse("0.05").thr) == Ratio{1, 20});
  CHECK_THROWS_AS(PostMinerConfig::parse("0"), Error);
  CHECK_THROWS_AS(PostMinerConfig::parse("1.5"), Error);
  CHECK_THROWS_AS(PostMinerConfig::parse("0.0"), Error);
  CHECK_THROWS_AS(PostMinerConfig::parse("abc"), Error);
}

TEST_CASE("post-mining invariants on random trees") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::uint64_t> pick(1, 6);
  for (const auto& t : random_trees(123, 300)) {
    auto thr = pick(rng);
    auto out = prune_and_merge(t, PostMinerConfig::absolute(thr));
    out.validate();

    // root kept with its counts
    CHECK(out.root().page == t.root().page);
    CHECK(out.root().hits == t.root().hits);

    // every surviving non-root node is frequent
    out.visit([&](AggregateTree::NodeId id, const AggregateTree::Node& n, std::size_t) {
      if (id != AggregateTree::root_id) CHECK(n.hits >= thr);
    });

    // idempotent
    CHECK(prune_and_merge(out, PostMinerConfig::absolute(thr)) == out);

    // nodes that were not merged carry counts of some input node with the same page
    auto in = oracle::flatten(t);
    out.visit([&](AggregateTree::NodeId id, const AggregateTree::Node& n, std::size_t) {
      if (id == AggregateTree::root_id || n.merged) return;
      bool found = false;
      for (const auto& [path, c] : in) {
        if (!path.empty() && path.back() == *n.page && c == C{n.hits, n.ends, n.completed}) found = true;
      }
      CHECK(found);
    });

    // nothing is invented
    auto before = totals(t);
    auto after = totals(out);
    CHECK(after.ends <= before.ends);
    CHECK(after.completed <= before.completed);

    // a frequent node whose ancestors are all frequent keeps its path
    for (const auto& [path, c] : in) {
      bool frequent = true;
      for (std::size_t len = t.root().page ? 2 : 1; len <= path.size(); ++len) {
        frequent = frequent && in.at(std::vector<PageOccurrence>(path.begin(), path.begin() + static_cast<long>(len))).hits >= thr;
      }
      if (frequent) CHECK(oracle::flatten(out).count(path) == 1);
    }
  }
}

TEST_CASE("raising the threshold never grows the tree") {
  for (const auto& t : random_trees(77, 100)) {
    std::size_t prev = t.node_count();
    for (std::uint64_t thr = 1; thr <= 8; ++thr) {
      auto n = prune_and_merge(t, PostMinerConfig::absolute(thr)).node_count();
      CHECK(n <= prev);
      prev = n;
    }
  }
}
