#pragma once

// Brute-force reference implementations and random instance generators.
// Deliberately naive: every embedding of a g-sequence is enumerated, pattern
// trees are rebuilt from explicit truncated paths, and query bindings are
// enumerated over the whole alphabet.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "wum/aggregate_tree.hpp"
#include "wum/core.hpp"
#include "wum/miner.hpp"
#include "wum/mint.hpp"

namespace oracle {

using wum::GSequence;
using wum::PageOccurrence;
using wum::Sequence;
using wum::Wildcard;

/// Positions (0-based) of every embedding of g in s.
inline void embeddings(const GSequence& g, const Sequence& s, std::size_t k, std::size_t from,
                       std::vector<std::size_t>& cur, std::vector<std::vector<std::size_t>>& out) {
  if (k == g.size()) {
    out.push_back(cur);
    return;
  }
  for (std::size_t p = from; p < s.size(); ++p) {
    if (k == 0 && g.anchored && p != 0) break;
    if (k > 0) {
      std::size_t gap = p - cur.back() - 1;
      if (gap < g.wildcards[k - 1].lower) continue;
      if (gap > g.wildcards[k - 1].upper) break;
    }
    if (s[p] != g.elements[k]) continue;
    cur.push_back(p);
    embeddings(g, s, k + 1, p + 1, cur, out);
    cur.pop_back();
  }
}

inline bool matches(const GSequence& g, const Sequence& s) {
  if (g.empty()) return true;
  std::vector<std::size_t> cur;
  std::vector<std::vector<std::size_t>> out;
  embeddings(g, s, 0, 0, cur, out);
  return !out.empty();
}

inline std::uint64_t hits(const GSequence& g, const std::vector<Sequence>& log) {
  std::uint64_t n = 0;
  for (const auto& s : log) n += matches(g, s) ? 1 : 0;
  return n;
}

inline std::vector<std::uint64_t> supports(const GSequence& g, const std::vector<Sequence>& log) {
  std::vector<std::uint64_t> out;
  for (std::size_t k = 1; k <= g.size(); ++k) out.push_back(hits(g.prefix(k), log));
  return out;
}

struct Counts {
  std::uint64_t hits = 0;
  std::uint64_t ends = 0;
  std::uint64_t completed = 0;
  friend bool operator==(const Counts&, const Counts&) = default;
};

using FlatTree = std::map<std::vector<PageOccurrence>, Counts>;

inline FlatTree flatten(const wum::AggregateTree& t) {
  FlatTree out;
  std::vector<PageOccurrence> path;
  auto rec = [&](auto&& self, wum::AggregateTree::NodeId id) -> void {
    const auto& n = t.node(id);
    if (n.page) path.push_back(*n.page);
    out[path] = {n.hits, n.ends, n.completed};
    for (auto c : n.children) self(self, c);
    if (n.page) path.pop_back();
  };
  rec(rec, wum::AggregateTree::root_id);
  return out;
}

/// Tree i (0-based) of the navigation pattern of g, from explicit paths: every
/// session matching g1..g(i+1) contributes the pages following element i+1,
/// cut at element i+2 when it lies within the wildcard, otherwise truncated
/// after upper+1 pages.
inline FlatTree pattern_tree(const GSequence& g, std::size_t i, const std::vector<Sequence>& log) {
  FlatTree out;
  const auto& root = g.elements[i];
  out[{root}] = {};
  for (const auto& s : log) {
    if (!matches(g.prefix(i + 1), s)) continue;
    auto at = static_cast<std::size_t>(std::find(s.begin(), s.end(), root) - s.begin());
    std::vector<PageOccurrence> path{root};
    bool completed = false;
    if (i + 1 < g.size()) {
      const auto& w = g.wildcards[i];
      for (std::size_t r = 1; r <= w.upper + 1 && at + r < s.size(); ++r) {
        path.push_back(s[at + r]);
        if (s[at + r] == g.elements[i + 1] && r >= w.lower + 1) {
          completed = true;
          break;
        }
      }
    }
    for (std::size_t len = 1; len <= path.size(); ++len) {
      std::vector<PageOccurrence> pre(path.begin(), path.begin() + static_cast<long>(len));
      auto& c = out[pre];
      ++c.hits;
      if (len == path.size()) {
        ++c.ends;
        if (completed) ++c.completed;
      }
    }
  }
  return out;
}

/// Occurrence-numbered random sequence over concepts "c0".."c(alphabet-1)".
inline Sequence random_sequence(std::mt19937_64& rng, std::size_t alphabet, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet - 1);
  std::vector<wum::ConceptId> concepts;
  auto n = len(rng);
  for (std::size_t k = 0; k < n; ++k) concepts.push_back("c" + std::to_string(pick(rng)));
  std::map<wum::ConceptId, std::uint32_t> seen;
  Sequence s;
  for (const auto& c : concepts) s.push_back({c, ++seen[c]});
  return s;
}

inline std::vector<Sequence> random_log(std::mt19937_64& rng, std::size_t max_sessions,
                                        std::size_t alphabet, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> count(1, max_sessions);
  std::vector<Sequence> log;
  auto n = count(rng);
  for (std::size_t i = 0; i < n; ++i) log.push_back(random_sequence(rng, alphabet, max_len));
  return log;
}

inline Wildcard random_wildcard(std::mt19937_64& rng, std::uint32_t max_upper) {
  std::uniform_int_distribution<std::uint32_t> d(0, max_upper);
  auto a = d(rng);
  auto b = d(rng);
  return {std::min(a, b), std::max(a, b)};
}

/// Random g-sequence whose pages are mostly drawn from a sampled session, so
/// a fair share of instances have matches.
inline GSequence random_gsequence(std::mt19937_64& rng, const std::vector<Sequence>& log,
                                  std::size_t alphabet, std::size_t max_vars, std::uint32_t max_upper) {
  std::uniform_int_distribution<std::size_t> vars(1, max_vars);
  std::uniform_int_distribution<std::size_t> pick_session(0, log.size() - 1);
  std::bernoulli_distribution coin(0.5);
  GSequence g;
  g.anchored = coin(rng) && coin(rng);
  auto k = vars(rng);
  const auto& s = log[pick_session(rng)];
  std::uniform_int_distribution<std::size_t> pos(0, s.size() - 1);
  std::uniform_int_distribution<std::size_t> letter(0, alphabet - 1);
  std::uniform_int_distribution<std::uint32_t> occ(1, 2);
  for (std::size_t j = 0; j < k; ++j) {
    if (j > 0) g.wildcards.push_back(random_wildcard(rng, max_upper));
    if (coin(rng) || coin(rng)) {
      g.elements.push_back(s[pos(rng)]);
    } else {
      g.elements.push_back({"c" + std::to_string(letter(rng)), occ(rng)});
    }
  }
  return g;
}

/// Distinct page occurrences of a log, ascending.
inline std::vector<PageOccurrence> pages(const std::vector<Sequence>& log) {
  std::vector<PageOccurrence> out;
  for (const auto& s : log) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct QueryHit {
  GSequence gseq;
  std::vector<std::uint64_t> supports;
};

inline bool url_ok(const wum::mint::UrlConstraint& c, const std::string& url) {
  switch (c.op) {
    case wum::mint::UrlOp::contains:
      return url.find(c.literal) != std::string::npos;
    case wum::mint::UrlOp::endswith:
      return url.size() >= c.literal.size() &&
             url.compare(url.size() - c.literal.size(), c.literal.size(), c.literal) == 0;
    case wum::mint::UrlOp::equals:
      return url == c.literal;
  }
  return false;
}

inline bool cmp_ok(const wum::Ratio& a, wum::mint::Cmp c, const wum::Ratio& b) {
  switch (c) {
    case wum::mint::Cmp::ge:
      return a >= b;
    case wum::mint::Cmp::le:
      return a <= b;
    case wum::mint::Cmp::eq:
      return a == b;
  }
  return false;
}

/// Every binding of the template variables to page occurrences of the log,
/// filtered by the constraints after the fact; hits > 0 required. Bindings
/// whose prefix already has no hit are skipped, since extending a g-sequence
/// never adds hits.
inline std::vector<QueryHit> evaluate(const wum::mint::MintQuery& q, const std::vector<Sequence>& log) {
  auto alphabet = pages(log);
  auto n = q.templ.variables.size();
  std::vector<QueryHit> out;
  auto index = [&](const std::string& v) {
    return static_cast<std::size_t>(
        std::find(q.templ.variables.begin(), q.templ.variables.end(), v) - q.templ.variables.begin());
  };
  auto accept = [&](const GSequence& g, const std::vector<std::uint64_t>& sup) {
    for (const auto& c : q.constraints) {
      if (auto* u = std::get_if<wum::mint::UrlConstraint>(&c)) {
        if (!url_ok(*u, g.elements[index(u->variable)].concept_id)) return false;
      } else if (auto* o = std::get_if<wum::mint::OccurrenceConstraint>(&c)) {
        if (g.elements[index(o->variable)].occurrence != o->value) return false;
      } else if (auto* s = std::get_if<wum::mint::SupportConstraint>(&c)) {
        if (!cmp_ok(wum::Ratio{sup[index(s->variable)], 1}, s->cmp, s->value)) return false;
      } else if (auto* r = std::get_if<wum::mint::RatioConstraint>(&c)) {
        if (!cmp_ok(wum::Ratio{sup[index(r->numerator)], sup[index(r->denominator)]}, r->cmp, r->value))
          return false;
      }
    }
    return true;
  };
  GSequence g;
  g.anchored = q.templ.anchored;
  std::vector<std::uint64_t> sup;
  auto extend = [&](auto&& self) -> void {
    if (g.size() == n) {
      if (accept(g, sup)) out.push_back({g, sup});
      return;
    }
    for (const auto& page : alphabet) {
      if (!g.empty()) g.wildcards.push_back(q.templ.wildcards[g.size() - 1]);
      g.elements.push_back(page);
      auto h = hits(g, log);
      if (h > 0) {
        sup.push_back(h);
        self(self);
        sup.pop_back();
      }
      g.elements.pop_back();
      if (!g.wildcards.empty() && g.wildcards.size() == g.elements.size()) g.wildcards.pop_back();
    }
  };
  extend(extend);
  return out;
}

/// Random query over "c0".."c(alphabet-1)" with up to three variables.
inline wum::mint::MintQuery random_query(std::mt19937_64& rng, std::size_t alphabet,
                                         std::size_t max_vars, std::uint32_t max_upper) {
  using namespace wum::mint;
  std::uniform_int_distribution<std::size_t> vars(1, max_vars);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::size_t> letter(0, alphabet - 1);
  MintQuery q;
  q.selected = q.alias = "t";
  auto n = vars(rng);
  for (std::size_t i = 0; i < n; ++i) q.variables.push_back(std::string(1, static_cast<char>('a' + i)));
  q.templ.variables = q.variables;
  q.templ.anchored = coin(rng) && coin(rng);
  for (std::size_t i = 1; i < n; ++i) q.templ.wildcards.push_back(random_wildcard(rng, max_upper));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = q.variables[i];
    if (coin(rng) && coin(rng)) {
      q.constraints.push_back(UrlConstraint{v, UrlOp::equals, "c" + std::to_string(letter(rng))});
    } else if (coin(rng) && coin(rng)) {
      q.constraints.push_back(UrlConstraint{v, UrlOp::endswith, std::to_string(letter(rng))});
    }
    if (coin(rng)) q.constraints.push_back(OccurrenceConstraint{v, 1});
    if (coin(rng) && coin(rng)) {
      std::uniform_int_distribution<std::uint64_t> s(1, 6);
      q.constraints.push_back(SupportConstraint{v, coin(rng) ? Cmp::ge : Cmp::le, wum::Ratio{s(rng), 1}});
    }
    if (i > 0 && coin(rng)) {
      std::uniform_int_distribution<std::uint64_t> tenth(0, 10);
      q.constraints.push_back(RatioConstraint{v, q.variables[i - 1], coin(rng) ? Cmp::ge : Cmp::le,
                                              wum::Ratio{tenth(rng), 10}});
    }
  }
  return q;
}

}  // namespace oracle
