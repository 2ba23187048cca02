#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wum/aggregate_tree.hpp"
#include "wum/core.hpp"
#include "wum/mint.hpp"

namespace wum {

/// Concrete page occurrences separated by wildcards.
/// `wildcards.size() == elements.size() - 1` for a non-empty sequence.
struct GSequence {
  bool anchored = false;
  std::vector<PageOccurrence> elements;
  std::vector<Wildcard> wildcards;

  std::size_t size() const { return elements.size(); }
  bool empty() const { return elements.empty(); }
  /// The first k bound elements with their wildcards.
  GSequence prefix(std::size_t k) const;

  friend bool operator==(const GSequence&, const GSequence&) = default;
};

/// Text form `#(ParamA,1)[0;3](TextOnlyDescr,1)`; the `#` marks anchoring.
std::string to_string(const GSequence& g);
GSequence parse_gsequence(std::string_view text);

/// 1-based positions of the bound elements within the session.
struct MatchResult {
  std::vector<std::size_t> positions;
};

/// Leftmost match (smallest position for each bound element, backtracking
/// when a later wildcard cannot be satisfied).
std::optional<MatchResult> match_session(const GSequence& g, std::span<const PageOccurrence> s);

/// Sessions matched by g, with multiplicity. The empty g matches everything.
std::uint64_t hits(const GSequence& g, std::span<const Sequence> log);

/// Confidence of element j towards element i (1-based, i < j) of g:
/// hits(g1..gj) / hits(g1..gi). With i == 0 the denominator is the log size.
/// nullopt when the denominator is zero.
std::optional<Ratio> confidence(const GSequence& g, std::size_t i, std::size_t j,
                                std::span<const Sequence> log);

/// Aggregated Log plus the lookups the tree-based matcher needs. Sequences
/// must be occurrence-numbered, so a page occurs at most once on any path.
class LogIndex {
 public:
  explicit LogIndex(AggregateTree tree);
  explicit LogIndex(std::span<const Sequence> log);

  const AggregateTree& tree() const { return tree_; }
  std::uint64_t size() const { return tree_.root().hits; }
  std::size_t depth(AggregateTree::NodeId id) const { return depth_[id]; }
  /// Nodes carrying `page`, in tree order.
  const std::vector<AggregateTree::NodeId>& nodes_with(const PageOccurrence& page) const;
  /// Distinct pages present in the log, ascending.
  std::vector<PageOccurrence> pages() const;

 private:
  void build();

  AggregateTree tree_;
  std::vector<std::size_t> depth_;
  std::map<PageOccurrence, std::vector<AggregateTree::NodeId>> by_page_;
};

struct VariableStats {
  PageOccurrence page;
  std::uint64_t support = 0;
  /// towards[i] = confidence towards element i (0 = empty sequence, i.e. the
  /// whole log; k >= 1 = the k-th bound element).
  std::vector<std::optional<Ratio>> towards;
};

/// One tree per bound element. Tree i is rooted at element i and aggregates
/// the sub-paths from it up to element i + 1; paths that reach element i + 1
/// are cut there with `completed` set, paths that do not are followed for at
/// most upper + 1 elements. The last tree is a single node.
struct NavigationPattern {
  GSequence gseq;
  std::vector<VariableStats> stats;
  std::vector<AggregateTree> trees;
  std::uint64_t log_size = 0;
};

/// Hits of g computed on the Aggregated Log.
std::uint64_t hits(const GSequence& g, const LogIndex& index);

/// Supports of every prefix of g (entry k = hits of g1..g(k+1)).
std::vector<std::uint64_t> prefix_supports(const GSequence& g, const LogIndex& index);

NavigationPattern build_pattern(const GSequence& g, const LogIndex& index);
NavigationPattern build_pattern(const GSequence& g, std::span<const Sequence> log);

/// Single tree rooted at `start` (occurrence-anchored as in g) whose paths are
/// completed by any page in `ends` within `gap`. Used to merge several
/// comparable patterns sharing their first element into one. With `cut`
/// false, paths are not cut at a completing page but followed for the whole
/// budget (completed is still recorded), so the shape of the tree depends on
/// the log alone.
AggregateTree build_merged_tree(const PageOccurrence& start, bool anchored, const Wildcard& gap,
                                std::span<const PageOccurrence> ends, const LogIndex& index,
                                bool cut = true);

class Cancelled : public Error {
 public:
  using Error::Error;
};

struct EvaluateOptions {
  std::optional<std::chrono::steady_clock::time_point> deadline;
  std::function<bool()> cancelled;
};

struct QueryResult {
  std::vector<std::string> variables;
  NavigationPattern pattern;
};

/// All (g-sequence, navigation pattern) pairs satisfying the query, ordered by
/// descending support of the last variable, then g-sequence text. Bindings
/// range over the page occurrences present in the log; only g-sequences with
/// at least one full match are returned. Throws Cancelled when the options
/// ask for it.
std::vector<QueryResult> evaluate_query(const mint::MintQuery& q, const LogIndex& index,
                                        const EvaluateOptions& options = {});

nlohmann::ordered_json ratio_to_json(const std::optional<Ratio>& r);
nlohmann::ordered_json pattern_to_json(const NavigationPattern& p);
nlohmann::ordered_json results_to_json(const mint::MintQuery& q,
                                       const std::vector<QueryResult>& results);

}  // namespace wum
