#include "doctest.h"

#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "wum/mint.hpp"

using namespace wum;
using namespace wum::mint;

namespace {

std::string read_query(const std::string& name) {
  std::ifstream in(fixtures::data_path("queries/" + name));
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SyntaxError syntax_error_of(const std::string& text) {
  try {
    parse_query(text);
  } catch (const SyntaxError& e) {
    return e;
  }
  FAIL("query parsed unexpectedly: " << text);
  return SyntaxError(0, 0, "");
}

}  // namespace

TEST_CASE("anchored descriptor query parses into the expected tree") {
  auto q = parse_query(read_query("ex5.mint"));
  MintQuery expected;
  expected.selected = "t";
  expected.variables = {"x", "y"};
  expected.templ = TemplateExpr{true, {"x", "y"}, {Wildcard{0, 3}}};
  expected.alias = "t";
  expected.constraints = {
      UrlConstraint{"y", UrlOp::contains, "Descr"},
      OccurrenceConstraint{"y", 1},
      RatioConstraint{"y", "x", Cmp::ge, Ratio{1, 5}},
      SupportConstraint{"x", Cmp::ge, Ratio{30, 1}},
  };
  CHECK(q == expected);
}

TEST_CASE("success query parses url equality") {
  auto q = parse_query(read_query("s62.mint"));
  CHECK_FALSE(q.templ.anchored);
  CHECK(q.variables == std::vector<std::string>{"a", "b"});
  REQUIRE(q.constraints.size() == 3);
  CHECK(q.constraints[0] == Constraint{UrlConstraint{"a", UrlOp::contains, "SEITE1"}});
  CHECK(q.constraints[1] == Constraint{OccurrenceConstraint{"a", 1}});
  CHECK(q.constraints[2] == Constraint{UrlConstraint{"b", UrlOp::equals, "/SUCCESS"}});
}

TEST_CASE("misspelled occurrence attribute is accepted") {
  auto q = parse_query(read_query("s63.mint"));
  REQUIRE(q.constraints.size() == 3);
  CHECK(q.constraints[0] == Constraint{UrlConstraint{"x", UrlOp::endswith, "SEITE1-LASALI-D"}});
  CHECK(q.constraints[1] == Constraint{OccurrenceConstraint{"x", 1}});
  CHECK(q.constraints[2] == Constraint{RatioConstraint{"y", "x", Cmp::ge, Ratio{9, 200}}});
}

TEST_CASE("printing and reparsing is the identity") {
  for (const char* name : {"ex5.mint", "s62.mint", "s63.mint"}) {
    auto q = parse_query(read_query(name));
    auto text = print_query(q);
    CHECK(parse_query(text) == q);
    CHECK(print_query(parse_query(text)) == text);
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    auto q = oracle::random_query(rng, 10, 3, 4);
    CHECK(parse_query(print_query(q)) == q);
  }
}

TEST_CASE("keywords are case-insensitive and whitespace is free") {
  auto a = parse_query("SELECT t FROM node AS x y, TEMPLATE x [0;3] y AS t WHERE x.URL contains \"A\"");
  auto b = parse_query("select t\n  from node as x y ,template x[0;3]y as t\n where x.url contains \"A\"");
  CHECK(a == b);
}

TEST_CASE("unparenthesized ratio and equality support constraints") {
  auto q = parse_query("select t from node as x y, template x [1;2] y as t where y.support / x.support <= 0.5 and x.support = 4");
  REQUIRE(q.constraints.size() == 2);
  CHECK(q.constraints[0] == Constraint{RatioConstraint{"y", "x", Cmp::le, Ratio{1, 2}}});
  CHECK(q.constraints[1] == Constraint{SupportConstraint{"x", Cmp::eq, Ratio{4, 1}}});
}

TEST_CASE("single-variable template without constraints") {
  auto q = parse_query("select t from node as x, template x as t");
  CHECK(q.templ.variables.size() == 1);
  CHECK(q.templ.wildcards.empty());
  CHECK(q.constraints.empty());
}

TEST_CASE("syntax errors carry line and column") {
  auto e = syntax_error_of("select t from node as x y, template x [0;3 y as t");
  CHECK(e.line() == 1);
  CHECK(e.column() == 44);
  CHECK(e.message().find("']'") != std::string::npos);

  e = syntax_error_of("select t from node as x y,\ntemplate x [0;3] y as t\nwhere z.url contains \"A\"");
  CHECK(e.line() == 3);
  CHECK(e.column() == 7);
  CHECK(e.message().find("unknown variable") != std::string::npos);

  e = syntax_error_of("select t from node as x y, template x [0;3] y as t where x.color = 1");
  CHECK(e.column() == 60);
}

TEST_CASE("semantic problems are syntax errors") {
  CHECK_THROWS_AS(parse_query("select t from node as x y, template x [4;1] y as t"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x y, template y [0;1] x as t"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x x, template x [0;1] x as t"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x y, template x [0;1] y as u"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x y, template x [0;1] # y as t"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x, template x as t where x.occurrence = 0"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x, template x as t where x.url = 3"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x, template x as t where x.support >= 1."), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x, template x as t where x.url contains \"A"), SyntaxError);
  CHECK_THROWS_AS(parse_query("select t from node as x, template x as t trailing"), SyntaxError);
  CHECK_THROWS_AS(parse_query(""), SyntaxError);
}

TEST_CASE("validation warns about dead literals and reversed ratios") {
  auto h = fixtures::catalog_hierarchy();
  CHECK(validate_query(parse_query(read_query("ex5.mint")), h).empty());
  auto w = validate_query(parse_query("select t from node as x y, template x [0;1] y as t "
                                      "where x.url contains \"Nowhere\" and (x.support / y.support) >= 0.5"),
                          h);
  REQUIRE(w.size() == 2);
  CHECK(w[0].find("Nowhere") != std::string::npos);
  CHECK(w[1].find("numerator") != std::string::npos);
}

TEST_CASE("url constraints test concept names") {
  CHECK(UrlConstraint{"x", UrlOp::contains, "Descr"}.accepts("Descr+Image"));
  CHECK(UrlConstraint{"x", UrlOp::endswith, "Image"}.accepts("Descr+Image"));
  CHECK_FALSE(UrlConstraint{"x", UrlOp::equals, "Descr"}.accepts("Descr+Image"));
  CHECK(compare(Ratio{1, 3}, Cmp::le, Ratio{1, 2}));
  CHECK(compare(Ratio{2, 4}, Cmp::eq, Ratio{1, 2}));
  CHECK_FALSE(compare(Ratio{1, 3}, Cmp::ge, Ratio{1, 2}));
}
