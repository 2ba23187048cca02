#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wum/efficiency.hpp"
#include "wum/miner.hpp"
#include "wum/postminer.hpp"
#include "wum/sessionizer.hpp"
#include "wum/taxonomy.hpp"

namespace wum {

struct HeuristicConfig {
  Ratio low_contact_threshold{1, 10};
  Ratio low_conversion_threshold{1, 2};
  Ratio high_conversion_threshold{7, 10};
  std::uint64_t frequent_pattern_min_support = 10;
  Wildcard short_spec{0, 3};
  std::optional<Wildcard> long_spec;
  /// Gap between a site entry page and an action page in eval_contact.
  Wildcard entry_spec{0, 3};
  PostMinerConfig postminer_thr = PostMinerConfig::fraction({1, 20});
  Ratio contact_shift_delta{1, 10};
  Ratio divergence_delta{1, 20};
  /// Minimum confidence of the non-customer patterns merged for comparison.
  Ratio merge_confidence_threshold{1, 20};
  bool exclude_default_concept = true;
  /// Target concept for conversion analyses; all target pages when unset.
  std::optional<ConceptId> target;

  void validate() const;
};

enum class FindingKind {
  contact_shift,
  divergent_pattern,
  inefficient_in_between_page,
  low_conversion_inner_page,
  low_conversion_start_page,
};

std::string_view to_string(FindingKind k);

struct Evidence {
  /// "<view>:<g-sequence>" for every pattern the finding was read from.
  std::vector<std::string> pattern_refs;
  std::map<std::string, Ratio> ratios;
  std::map<std::string, std::uint64_t> counts;
  /// Path from the pattern root to the node concerned, when there is one.
  std::vector<PageOccurrence> path;
};

struct Finding {
  FindingKind kind = FindingKind::contact_shift;
  ConceptId concept_id;
  Evidence evidence;
  std::string narrative;
};

nlohmann::ordered_json findings_to_json(const std::vector<Finding>& findings);

/// Sorts by (kind, concept); ties keep their discovery order.
void sort_findings(std::vector<Finding>& findings);

std::string pattern_ref(View v, const GSequence& g);

/// Sessions through `page` in an unpruned pattern tree, and how many of them
/// reach a completing node at or below it.
struct Onward {
  std::uint64_t through = 0;
  std::uint64_t completing = 0;
};
Onward onward(const AggregateTree& pattern_tree, const PageOccurrence& page);

struct ContactReport {
  struct Row {
    ConceptId concept_id;
    Measure contact;
    Measure relative_contact;
  };
  std::vector<Row> rows;
  std::vector<Finding> findings;

  nlohmann::ordered_json to_json() const;
  std::string to_markdown() const;
};

/// Action pages with low contact: patterns `#entry [entry_spec] action` from
/// frequent entry pages, pruned; frequent in-between pages whose visitors
/// rarely continue to the action page are reported.
ContactReport eval_contact(const Partition& p, const ConceptHierarchy& h, const HeuristicConfig& cfg);

struct ConversionReport {
  struct Row {
    ConceptId start;
    ConceptId target;
    std::string spec;
    Measure conversion;
  };
  std::vector<Row> rows;
  std::vector<Finding> findings;

  nlohmann::ordered_json to_json() const;
  std::string to_markdown() const;
};

/// Over the active sessions: frequent start pages with low conversion towards
/// a target; inside each pattern, frequent pages that rarely lead to the
/// target are reported, or the start page itself when there are none.
ConversionReport eval_conversion(const Partition& p, const ConceptHierarchy& h,
                                 const HeuristicConfig& cfg);

enum class Comparability { same_prefix, equal_but_last };
std::string_view to_string(Comparability c);

struct ComparablePair {
  std::size_t customer = 0;
  std::size_t noncustomer = 0;
  Comparability mode = Comparability::same_prefix;
};

/// Pairs whose g-sequences are equal except for the last page occurrence
/// (same length >= 2), or failing that share their first element.
std::vector<ComparablePair> comparable_patterns(std::span<const GSequence> customer,
                                                std::span<const GSequence> noncustomer);

struct ComparedPattern {
  GSequence customer;
  std::vector<GSequence> noncustomer;
  Measure customer_conversion;
  AggregateTree customer_tree;
  AggregateTree noncustomer_tree;
};

/// Builds both sides over the same budget without cutting at completing pages,
/// prunes them with the post-miner threshold and appends divergent_pattern
/// findings for branches missing on one side or whose shares of the root
/// differ by more than the divergence delta. Target pages are not compared.
ComparedPattern compare_pattern(const GSequence& customer, std::vector<GSequence> noncustomer,
                                const LogIndex& customer_index, const LogIndex& noncustomer_index,
                                const ConceptHierarchy& h, const HeuristicConfig& cfg,
                                std::vector<Finding>& findings);

struct ComparisonReport {
  struct Row {
    ConceptId concept_id;
    Measure customer;
    Measure noncustomer;
  };
  std::vector<Row> rows;
  std::vector<ComparedPattern> patterns;
  std::vector<Finding> findings;

  nlohmann::ordered_json to_json() const;
  std::string to_markdown() const;
};

/// Relative contact of every action page in both logs (contact_shift when
/// they differ by more than the delta), and for each high-conversion customer
/// pattern a merged comparable non-customer pattern; both are pruned and
/// walked in parallel (divergent_pattern for branches missing on one side or
/// whose share of the root differs by more than the delta).
ComparisonReport eval_comparison(const SessionLog& customer, const SessionLog& noncustomer,
                                 const ConceptHierarchy& h, const HeuristicConfig& cfg);

}  // namespace wum
