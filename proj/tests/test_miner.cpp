#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "wum/miner.hpp"

using namespace wum;

namespace {

GSequence catalog_pattern(std::uint32_t upper) {
  GSequence g;
  g.elements = {{"ParamA", 1}, {"TextOnlyDescr", 1}};
  g.wildcards = {Wildcard{0, upper}};
  return g;
}

std::vector<std::string> texts(const std::vector<QueryResult>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(to_string(r.pattern.gseq));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("g-sequence text form round trips") {
  auto g = catalog_pattern(3);
  CHECK(to_string(g) == "(ParamA,1)[0;3](TextOnlyDescr,1)");
  CHECK(parse_gsequence(to_string(g)) == g);
  g.anchored = true;
  CHECK(to_string(g) == "#(ParamA,1)[0;3](TextOnlyDescr,1)");
  CHECK(parse_gsequence(to_string(g)) == g);
  CHECK(g.prefix(1).elements.size() == 1);
  CHECK(g.prefix(1).wildcards.empty());
  CHECK_THROWS_AS(parse_gsequence("(A,1)[0;3]"), Error);
  CHECK_THROWS_AS(parse_gsequence("(A,0)"), Error);
}

TEST_CASE("catalog pattern hits depend on the wildcard width") {
  auto log = fixtures::catalog_sequences();
  CHECK(hits(catalog_pattern(3), log) == 2);
  CHECK(hits(catalog_pattern(2), log) == 1);
  LogIndex index{std::span<const Sequence>(log)};
  CHECK(hits(catalog_pattern(3), index) == 2);
  CHECK(hits(catalog_pattern(2), index) == 1);
  CHECK(hits(GSequence{}, log) == 3);
}

TEST_CASE("catalog navigation pattern trees") {
  auto log = fixtures::catalog_sequences();
  auto p = build_pattern(catalog_pattern(3), log);
  REQUIRE(p.trees.size() == 2);
  REQUIRE(p.stats.size() == 2);
  CHECK(p.log_size == 3);
  CHECK(p.stats[0].support == 3);
  CHECK(p.stats[1].support == 2);
  REQUIRE(p.stats[1].towards.size() == 2);
  CHECK(p.stats[1].towards[1] == std::optional<Ratio>(Ratio{2, 3}));
  CHECK(p.stats[1].towards[0] == std::optional<Ratio>(Ratio{2, 3}));

  using C = oracle::Counts;
  PageOccurrence a{"ParamA", 1}, sl1{"ShortList", 1}, sl2{"ShortList", 2}, ll1{"LongList", 1},
      ll2{"LongList", 2}, ab{"ParamA&B", 1}, bx{"ButtonX", 1}, t{"TextOnlyDescr", 1};
  oracle::FlatTree first{
      {{a}, C{3, 0, 0}},
      {{a, sl1}, C{1, 0, 0}},
      {{a, sl1, sl2}, C{1, 0, 0}},
      {{a, sl1, sl2, t}, C{1, 1, 1}},
      {{a, ll1}, C{2, 0, 0}},
      {{a, ll1, ab}, C{1, 0, 0}},
      {{a, ll1, ab, ll2}, C{1, 0, 0}},
      {{a, ll1, ab, ll2, t}, C{1, 1, 1}},
      {{a, ll1, bx}, C{1, 0, 0}},
      {{a, ll1, bx, ll2}, C{1, 1, 0}},
  };
  CHECK(oracle::flatten(p.trees[0]) == first);
  CHECK(oracle::flatten(p.trees[1]) == oracle::FlatTree{{{t}, C{2, 2, 0}}});
  p.trees[0].validate();
  p.trees[1].validate();
}

TEST_CASE("confidence follows the hit ratio of prefixes") {
  auto log = fixtures::catalog_sequences();
  auto g = catalog_pattern(3);
  CHECK(confidence(g, 1, 2, log) == std::optional<Ratio>(Ratio{2, 3}));
  CHECK(confidence(g, 0, 1, log) == std::optional<Ratio>(Ratio{1, 1}));
  GSequence none;
  none.elements = {{"Nothing", 1}, {"ParamA", 1}};
  none.wildcards = {Wildcard{0, 1}};
  CHECK_FALSE(confidence(none, 1, 2, log).has_value());
  CHECK_THROWS_AS(confidence(g, 2, 2, log), Error);
}

TEST_CASE("leftmost match positions are 1-based") {
  auto log = fixtures::catalog_sequences();
  auto m = match_session(catalog_pattern(3), log[1]);
  REQUIRE(m);
  CHECK(m->positions == std::vector<std::size_t>{1, 5});
  CHECK_FALSE(match_session(catalog_pattern(2), log[1]));

  // the leftmost first element fails, a later one succeeds
  Sequence s{{"A", 1}, {"X", 1}, {"X", 2}, {"X", 3}, {"B", 1}, {"A", 2}, {"C", 1}};
  GSequence g;
  g.elements = {{"X", 2}, {"C", 1}};
  g.wildcards = {Wildcard{0, 5}};
  m = match_session(g, s);
  REQUIRE(m);
  CHECK(m->positions == std::vector<std::size_t>{3, 7});
  g.anchored = true;
  CHECK_FALSE(match_session(g, s));
}

TEST_CASE("index-based mining agrees with brute force") {
  std::mt19937_64 rng(42);
  for (int round = 0; round < 300; ++round) {
    auto log = oracle::random_log(rng, 40, 5, 8);
    LogIndex index{std::span<const Sequence>(log)};
    for (int k = 0; k < 5; ++k) {
      auto g = oracle::random_gsequence(rng, log, 5, 3, 4);
      CAPTURE(to_string(g));
      CHECK(hits(g, index) == oracle::hits(g, log));
      CHECK(hits(g, std::span<const Sequence>(log)) == oracle::hits(g, log));
      CHECK(prefix_supports(g, index) == oracle::supports(g, log));
      for (const auto& s : log) CHECK(match_session(g, s).has_value() == oracle::matches(g, s));
      auto p = build_pattern(g, index);
      REQUIRE(p.trees.size() == g.size());
      for (std::size_t i = 0; i < g.size(); ++i) {
        p.trees[i].validate();
        CHECK(oracle::flatten(p.trees[i]) == oracle::pattern_tree(g, i, log));
      }
    }
  }
}

TEST_CASE("widening a wildcard never loses hits") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 300; ++round) {
    auto log = oracle::random_log(rng, 30, 4, 8);
    LogIndex index{std::span<const Sequence>(log)};
    auto g = oracle::random_gsequence(rng, log, 4, 3, 3);
    if (g.wildcards.empty()) continue;
    auto wide = g;
    std::uniform_int_distribution<std::size_t> which(0, g.wildcards.size() - 1);
    auto& w = wide.wildcards[which(rng)];
    if (w.lower > 0) --w.lower;
    ++w.upper;
    CHECK(hits(wide, index) >= hits(g, index));
    auto sup = prefix_supports(g, index);
    for (std::size_t k = 1; k < sup.size(); ++k) CHECK(sup[k] <= sup[k - 1]);
  }
}

TEST_CASE("query evaluation agrees with enumerated bindings") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 300; ++round) {
    auto log = oracle::random_log(rng, 30, 5, 7);
    LogIndex index{std::span<const Sequence>(log)};
    auto q = oracle::random_query(rng, 5, 3, 3);
    CAPTURE(mint::print_query(q));
    auto got = evaluate_query(q, index);
    auto want = oracle::evaluate(q, log);
    std::vector<std::string> want_texts;
    for (const auto& w : want) want_texts.push_back(to_string(w.gseq));
    std::sort(want_texts.begin(), want_texts.end());
    CHECK(texts(got) == want_texts);
    for (std::size_t i = 1; i < got.size(); ++i) {
      CHECK(got[i - 1].pattern.stats.back().support >= got[i].pattern.stats.back().support);
    }
    for (const auto& r : got) {
      auto it = std::find_if(want.begin(), want.end(), [&](const oracle::QueryHit& w) { return w.gseq == r.pattern.gseq; });
      if (it == want.end()) continue;
      for (std::size_t k = 0; k < r.pattern.stats.size(); ++k) CHECK(r.pattern.stats[k].support == it->supports[k]);
    }
  }
}

TEST_CASE("the descriptor query finds the catalog pattern") {
  auto log = fixtures::catalog_sequences();
  LogIndex index{std::span<const Sequence>(log)};
  auto q = mint::parse_query("select t from node as x y, template # x [0;3] y as t "
                             "where y.url contains \"Descr\" and y.occurrence = 1 and x.url = \"ParamA\"");
  auto rs = evaluate_query(q, index);
  REQUIRE(rs.size() == 1);
  CHECK(to_string(rs[0].pattern.gseq) == "#(ParamA,1)[0;3](TextOnlyDescr,1)");
  CHECK(rs[0].variables == std::vector<std::string>{"x", "y"});
  auto j = results_to_json(q, rs);
  CHECK(j["count"] == 1);
  CHECK(j["results"][0]["stats"][1]["support"] == 2);
  CHECK(j["results"][0]["binding"]["y"] == "(TextOnlyDescr,1)");
}

TEST_CASE("cancellation and deadlines abort evaluation") {
  std::mt19937_64 rng(1);
  auto log = oracle::random_log(rng, 50, 6, 8);
  LogIndex index{std::span<const Sequence>(log)};
  auto q = mint::parse_query("select t from node as x y z, template x [0;4] y [0;4] z as t");
  EvaluateOptions cancel;
  cancel.cancelled = [] { return true; };
  CHECK_THROWS_AS(evaluate_query(q, index, cancel), Cancelled);
  EvaluateOptions late;
  late.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  CHECK_THROWS_AS(evaluate_query(q, index, late), Cancelled);
  CHECK_NOTHROW(evaluate_query(q, index));
}

TEST_CASE("merged trees collect several end pages") {
  auto log = fixtures::catalog_sequences();
  LogIndex index{std::span<const Sequence>(log)};
  std::vector<PageOccurrence> ends{{"TextOnlyDescr", 1}, {"ButtonX", 1}};
  auto t = build_merged_tree({"ParamA", 1}, false, Wildcard{0, 3}, ends, index);
  t.validate();
  CHECK(t.root().hits == 3);
  std::uint64_t completed = 0;
  t.visit([&](AggregateTree::NodeId, const AggregateTree::Node& n, std::size_t) { completed += n.completed; });
  CHECK(completed == 3);

  auto open = build_merged_tree({"ParamA", 1}, false, Wildcard{0, 3}, ends, index, false);
  open.validate();
  CHECK(open.node_count() >= t.node_count());
}
