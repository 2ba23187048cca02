#include "wum/miner.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>

namespace wum {

using NodeId = AggregateTree::NodeId;
using Nodes = std::vector<NodeId>;

GSequence GSequence::prefix(std::size_t k) const {
  GSequence out;
  out.anchored = anchored;
  k = std::min(k, elements.size());
  out.elements.assign(elements.begin(), elements.begin() + static_cast<std::ptrdiff_t>(k));
  if (k > 1) out.wildcards.assign(wildcards.begin(), wildcards.begin() + static_cast<std::ptrdiff_t>(k - 1));
  return out;
}

std::string to_string(const GSequence& g) {
  std::string out = g.anchored ? "#" : "";
  for (std::size_t i = 0; i < g.elements.size(); ++i) {
    if (i > 0) out += to_string(g.wildcards[i - 1]);
    out += to_string(g.elements[i]);
  }
  return out;
}

namespace {

std::uint32_t parse_uint(std::string_view s, std::string_view text) {
  std::uint32_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error("malformed g-sequence '" + std::string(text) + "': bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

GSequence parse_gsequence(std::string_view text) {
  GSequence g;
  std::size_t i = 0;
  auto fail = [&](const std::string& why) -> void {
    throw Error("malformed g-sequence '" + std::string(text) + "' at offset " + std::to_string(i) +
                ": " + why);
  };
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  skip_ws();
  if (i < text.size() && text[i] == '#') {
    g.anchored = true;
    ++i;
  }
  while (true) {
    skip_ws();
    if (i >= text.size() || text[i] != '(') fail("expected '('");
    // The concept id may itself contain ',' or ')': the element ends at the
    // first ")" preceded by ",<digits>".
    std::size_t close = std::string_view::npos;
    std::size_t comma = 0;
    for (std::size_t j = i + 1; j < text.size(); ++j) {
      if (text[j] != ')') continue;
      std::size_t k = j;
      while (k > i + 1 && std::isdigit(static_cast<unsigned char>(text[k - 1]))) --k;
      if (k < j && k > i + 2 && text[k - 1] == ',') {
        close = j;
        comma = k - 1;
        break;
      }
    }
    if (close == std::string_view::npos) fail("unterminated page occurrence");
    PageOccurrence p{std::string(text.substr(i + 1, comma - i - 1)),
                     parse_uint(text.substr(comma + 1, close - comma - 1), text)};
    if (p.occurrence == 0) fail("occurrence numbers start at 1");
    g.elements.push_back(std::move(p));
    i = close + 1;
    skip_ws();
    if (i >= text.size()) break;
    if (text[i] != '[') fail("expected '['");
    auto semi = text.find(';', i);
    auto end = text.find(']', i);
    if (semi == std::string_view::npos || end == std::string_view::npos || semi > end) fail("malformed wildcard");
    Wildcard w{parse_uint(text.substr(i + 1, semi - i - 1), text),
               parse_uint(text.substr(semi + 1, end - semi - 1), text)};
    if (w.lower > w.upper) fail("wildcard lower bound exceeds upper bound");
    g.wildcards.push_back(w);
    i = end + 1;
  }
  return g;
}

namespace {

bool match_from(const GSequence& g, std::span<const PageOccurrence> s, std::size_t k,
                std::vector<std::size_t>& pos) {
  if (k == g.elements.size()) return true;
  std::size_t lo = 0;
  std::size_t hi = s.empty() ? 0 : s.size() - 1;
  if (k == 0) {
    if (g.anchored) hi = 0;
  } else {
    std::size_t prev = pos.back() - 1;
    lo = prev + 1 + g.wildcards[k - 1].lower;
    hi = std::min(hi, prev + 1 + g.wildcards[k - 1].upper);
  }
  for (std::size_t p = lo; p < s.size() && p <= hi; ++p) {
    if (s[p] != g.elements[k]) continue;
    pos.push_back(p + 1);
    if (match_from(g, s, k + 1, pos)) return true;
    pos.pop_back();
  }
  return false;
}

}  // namespace

std::optional<MatchResult> match_session(const GSequence& g, std::span<const PageOccurrence> s) {
  MatchResult m;
  if (!match_from(g, s, 0, m.positions)) return std::nullopt;
  return m;
}

std::uint64_t hits(const GSequence& g, std::span<const Sequence> log) {
  std::uint64_t n = 0;
  for (const auto& s : log) {
    if (match_session(g, s)) ++n;
  }
  return n;
}

std::optional<Ratio> confidence(const GSequence& g, std::size_t i, std::size_t j,
                                std::span<const Sequence> log) {
  if (i >= j || j > g.size()) throw Error("confidence needs 0 <= i < j <= length of the g-sequence");
  std::uint64_t den = i == 0 ? log.size() : hits(g.prefix(i), log);
  return make_ratio(hits(g.prefix(j), log), den);
}

LogIndex::LogIndex(AggregateTree tree) : tree_(std::move(tree)) { build(); }

LogIndex::LogIndex(std::span<const Sequence> log) : tree_(build_aggregated_log(log)) { build(); }

void LogIndex::build() {
  depth_.assign(tree_.node_count(), 0);
  tree_.visit([&](NodeId id, const AggregateTree::Node& n, std::size_t d) {
    depth_[id] = d;
    if (n.page) by_page_[*n.page].push_back(id);
  });
}

const Nodes& LogIndex::nodes_with(const PageOccurrence& page) const {
  static const Nodes none;
  auto it = by_page_.find(page);
  return it == by_page_.end() ? none : it->second;
}

std::vector<PageOccurrence> LogIndex::pages() const {
  std::vector<PageOccurrence> out;
  out.reserve(by_page_.size());
  for (const auto& [p, nodes] : by_page_) out.push_back(p);
  return out;
}

namespace {

/// Calls f(node, relative depth) for every descendant of `from` at relative
/// depth 1..max_depth. f returns false to stop descending below that node.
template <typename F>
void for_descendants(const AggregateTree& t, NodeId from, std::size_t max_depth, F&& f) {
  std::vector<std::pair<NodeId, std::size_t>> stack;
  for (NodeId c : t.node(from).children) stack.emplace_back(c, 1);
  while (!stack.empty()) {
    auto [id, r] = stack.back();
    stack.pop_back();
    if (!f(id, r) || r == max_depth) continue;
    for (NodeId c : t.node(id).children) stack.emplace_back(c, r + 1);
  }
}

Nodes first_level(const LogIndex& idx, const PageOccurrence& page, bool anchored) {
  if (!anchored) return idx.nodes_with(page);
  Nodes out;
  if (auto c = idx.tree().find_child(AggregateTree::root_id, page)) out.push_back(*c);
  return out;
}

Nodes next_level(const LogIndex& idx, const Nodes& from, const Wildcard& w,
                 const PageOccurrence& page) {
  Nodes out;
  const auto& t = idx.tree();
  for (NodeId m : from) {
    for_descendants(t, m, w.upper + 1, [&](NodeId id, std::size_t r) {
      if (t.node(id).page == page) {
        if (r >= w.lower + 1) out.push_back(id);
        return false;
      }
      return true;
    });
  }
  return out;
}

std::vector<Nodes> match_levels(const GSequence& g, const LogIndex& idx) {
  std::vector<Nodes> levels;
  if (g.empty()) return levels;
  levels.push_back(first_level(idx, g.elements[0], g.anchored));
  for (std::size_t k = 1; k < g.size(); ++k) {
    levels.push_back(next_level(idx, levels.back(), g.wildcards[k - 1], g.elements[k]));
  }
  return levels;
}

std::uint64_t total_hits(const AggregateTree& t, const Nodes& nodes) {
  std::uint64_t n = 0;
  for (NodeId id : nodes) n += t.node(id).hits;
  return n;
}

template <typename IsEnd>
AggregateTree pattern_tree(const LogIndex& idx, const Nodes& roots, const PageOccurrence& root_page,
                           const Wildcard& w, IsEnd&& is_end, bool cut = true) {
  const auto& log = idx.tree();
  AggregateTree out(root_page);
  struct Item {
    NodeId log_node;
    NodeId out_node;
    std::size_t depth;
  };
  std::vector<Item> stack;
  for (NodeId m : roots) {
    out.root().hits += log.node(m).hits;
    out.root().ends += log.node(m).ends;
    stack.push_back({m, AggregateTree::root_id, 0});
  }
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    for (NodeId c : log.node(it.log_node).children) {
      const auto& ln = log.node(c);
      std::size_t r = it.depth + 1;
      NodeId oc = out.child(it.out_node, *ln.page);
      auto& on = out.node(oc);
      on.hits += ln.hits;
      bool reached = is_end(*ln.page) && r >= w.lower + 1;
      if (reached) on.completed += ln.hits;
      if (reached && cut) {
        on.ends += ln.hits;
      } else if (r == static_cast<std::size_t>(w.upper) + 1) {
        on.ends += ln.hits;
      } else {
        on.ends += ln.ends;
        stack.push_back({c, oc, r});
      }
    }
  }
  out.normalize();
  return out;
}

std::vector<VariableStats> make_stats(const GSequence& g, const std::vector<std::uint64_t>& sup,
                                      std::uint64_t log_size) {
  std::vector<VariableStats> stats;
  for (std::size_t k = 0; k < g.size(); ++k) {
    VariableStats v;
    v.page = g.elements[k];
    v.support = sup[k];
    v.towards.push_back(make_ratio(sup[k], log_size));
    for (std::size_t i = 0; i < k; ++i) v.towards.push_back(make_ratio(sup[k], sup[i]));
    stats.push_back(std::move(v));
  }
  return stats;
}

}  // namespace

std::uint64_t hits(const GSequence& g, const LogIndex& index) {
  if (g.empty()) return index.size();
  return prefix_supports(g, index).back();
}

std::vector<std::uint64_t> prefix_supports(const GSequence& g, const LogIndex& index) {
  std::vector<std::uint64_t> out;
  for (const auto& level : match_levels(g, index)) out.push_back(total_hits(index.tree(), level));
  return out;
}

NavigationPattern build_pattern(const GSequence& g, const LogIndex& index) {
  NavigationPattern p;
  p.gseq = g;
  p.log_size = index.size();
  if (g.empty()) return p;
  auto levels = match_levels(g, index);
  std::vector<std::uint64_t> sup;
  for (const auto& level : levels) sup.push_back(total_hits(index.tree(), level));
  p.stats = make_stats(g, sup, p.log_size);
  for (std::size_t k = 0; k + 1 < g.size(); ++k) {
    const auto& next = g.elements[k + 1];
    p.trees.push_back(pattern_tree(index, levels[k], g.elements[k], g.wildcards[k],
                                   [&](const PageOccurrence& q) { return q == next; }));
  }
  AggregateTree last(g.elements.back());
  last.root().hits = sup.back();
  last.root().ends = sup.back();
  p.trees.push_back(std::move(last));
  return p;
}

NavigationPattern build_pattern(const GSequence& g, std::span<const Sequence> log) {
  return build_pattern(g, LogIndex(log));
}

AggregateTree build_merged_tree(const PageOccurrence& start, bool anchored, const Wildcard& gap,
                                std::span<const PageOccurrence> ends, const LogIndex& index,
                                bool cut) {
  std::set<PageOccurrence> targets(ends.begin(), ends.end());
  return pattern_tree(
      index, first_level(index, start, anchored), start, gap,
      [&](const PageOccurrence& q) { return targets.count(q) > 0; }, cut);
}

namespace {

class TemplateSearch {
 public:
  TemplateSearch(const mint::MintQuery& q, const LogIndex& idx, const EvaluateOptions& opt)
      : q_(q), idx_(idx), opt_(opt), n_(q.templ.variables.size()) {
    url_.resize(n_);
    occ_.resize(n_);
    support_.resize(n_);
    ratio_.resize(n_);
    for (const auto& c : q.constraints) {
      std::visit(
          [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, mint::UrlConstraint>) {
              url_[q.variable_index(x.variable)].push_back(&x);
            } else if constexpr (std::is_same_v<T, mint::OccurrenceConstraint>) {
              occ_[q.variable_index(x.variable)].push_back(&x);
            } else if constexpr (std::is_same_v<T, mint::SupportConstraint>) {
              support_[q.variable_index(x.variable)].push_back(&x);
            } else {
              auto a = q.variable_index(x.numerator);
              auto b = q.variable_index(x.denominator);
              ratio_[std::max(a, b)].push_back({&x, a, b});
            }
          },
          c);
    }
  }

  std::vector<GSequence> run() {
    if (n_ == 0) return {};
    std::map<PageOccurrence, Nodes> candidates;
    const auto& t = idx_.tree();
    if (q_.templ.anchored) {
      for (NodeId c : t.root().children) candidates[*t.node(c).page].push_back(c);
    } else {
      for (const auto& p : idx_.pages()) candidates[p] = idx_.nodes_with(p);
    }
    extend(0, candidates);
    return std::move(found_);
  }

 private:
  struct BoundRatio {
    const mint::RatioConstraint* c;
    std::size_t num;
    std::size_t den;
  };

  void check_cancel() const {
    if (opt_.cancelled && opt_.cancelled()) throw Cancelled("query evaluation cancelled");
    if (opt_.deadline && std::chrono::steady_clock::now() > *opt_.deadline) {
      throw Cancelled("query evaluation exceeded its time limit");
    }
  }

  bool admits(std::size_t k, const PageOccurrence& p) const {
    for (const auto* c : occ_[k]) {
      if (p.occurrence != c->value) return false;
    }
    for (const auto* c : url_[k]) {
      if (!c->accepts(p.concept_id)) return false;
    }
    return true;
  }

  bool statistics_hold(std::size_t k) const {
    for (const auto* c : support_[k]) {
      if (!mint::compare(Ratio{sup_[k], 1}, c->cmp, c->value)) return false;
    }
    for (const auto& r : ratio_[k]) {
      auto value = make_ratio(sup_[r.num], sup_[r.den]);
      if (!value || !mint::compare(*value, r.c->cmp, r.c->value)) return false;
    }
    return true;
  }

  void extend(std::size_t k, const std::map<PageOccurrence, Nodes>& candidates) {
    const auto& t = idx_.tree();
    for (const auto& [page, nodes] : candidates) {
      check_cancel();
      if (!admits(k, page)) continue;
      std::uint64_t s = total_hits(t, nodes);
      if (s == 0) continue;
      bound_.push_back(page);
      sup_.push_back(s);
      if (statistics_hold(k)) {
        if (k + 1 == n_) {
          GSequence g;
          g.anchored = q_.templ.anchored;
          g.elements = bound_;
          g.wildcards = q_.templ.wildcards;
          found_.push_back(std::move(g));
        } else {
          extend(k + 1, successors(nodes, q_.templ.wildcards[k]));
        }
      }
      bound_.pop_back();
      sup_.pop_back();
    }
  }

  std::map<PageOccurrence, Nodes> successors(const Nodes& from, const Wildcard& w) const {
    std::map<PageOccurrence, Nodes> out;
    const auto& t = idx_.tree();
    for (NodeId m : from) {
      for_descendants(t, m, w.upper + 1, [&](NodeId id, std::size_t r) {
        if (r >= w.lower + 1) out[*t.node(id).page].push_back(id);
        return true;
      });
    }
    return out;
  }

  const mint::MintQuery& q_;
  const LogIndex& idx_;
  const EvaluateOptions& opt_;
  std::size_t n_;
  std::vector<std::vector<const mint::UrlConstraint*>> url_;
  std::vector<std::vector<const mint::OccurrenceConstraint*>> occ_;
  std::vector<std::vector<const mint::SupportConstraint*>> support_;
  std::vector<std::vector<BoundRatio>> ratio_;
  std::vector<PageOccurrence> bound_;
  std::vector<std::uint64_t> sup_;
  std::vector<GSequence> found_;
};

}  // namespace

std::vector<QueryResult> evaluate_query(const mint::MintQuery& q, const LogIndex& index,
                                        const EvaluateOptions& options) {
  auto found = TemplateSearch(q, index, options).run();
  std::vector<QueryResult> out;
  out.reserve(found.size());
  for (const auto& g : found) {
    if (options.cancelled && options.cancelled()) throw Cancelled("query evaluation cancelled");
    out.push_back({q.templ.variables, build_pattern(g, index)});
  }
  std::vector<std::string> keys;
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& r : out) keys.push_back(to_string(r.pattern.gseq));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto sa = out[a].pattern.stats.back().support;
    auto sb = out[b].pattern.stats.back().support;
    if (sa != sb) return sa > sb;
    return keys[a] < keys[b];
  });
  std::vector<QueryResult> sorted;
  sorted.reserve(out.size());
  for (auto i : order) sorted.push_back(std::move(out[i]));
  return sorted;
}

nlohmann::ordered_json ratio_to_json(const std::optional<Ratio>& r) {
  if (!r) return nullptr;
  nlohmann::ordered_json j;
  j["num"] = r->num;
  j["den"] = r->den;
  j["value"] = r->value();
  return j;
}

nlohmann::ordered_json pattern_to_json(const NavigationPattern& p) {
  nlohmann::ordered_json j;
  j["gsequence"] = to_string(p.gseq);
  j["log_size"] = p.log_size;
  j["stats"] = nlohmann::ordered_json::array();
  for (const auto& s : p.stats) {
    nlohmann::ordered_json js;
    js["concept"] = s.page.concept_id;
    js["occ"] = s.page.occurrence;
    js["support"] = s.support;
    js["confidence"] = nlohmann::ordered_json::array();
    for (const auto& r : s.towards) js["confidence"].push_back(ratio_to_json(r));
    j["stats"].push_back(std::move(js));
  }
  j["trees"] = nlohmann::ordered_json::array();
  for (const auto& t : p.trees) j["trees"].push_back(t.to_json_value());
  return j;
}

nlohmann::ordered_json results_to_json(const mint::MintQuery& q,
                                       const std::vector<QueryResult>& results) {
  nlohmann::ordered_json j;
  j["query"] = mint::print_query(q);
  j["count"] = results.size();
  j["results"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json jr;
    jr["binding"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < r.variables.size(); ++i) {
      jr["binding"][r.variables[i]] = to_string(r.pattern.gseq.elements[i]);
    }
    auto body = pattern_to_json(r.pattern);
    for (auto& [k, v] : body.items()) jr[k] = v;
    j["results"].push_back(std::move(jr));
  }
  return j;
}

}  // namespace wum
