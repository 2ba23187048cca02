#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wum/core.hpp"
#include "wum/sessionizer.hpp"
#include "wum/taxonomy.hpp"

namespace wum {

/// Group of paths from P to T: every path, or those whose gap lies in a
/// wildcard. "all" resolves to [0; longest session] of the log at hand.
struct PathSpec {
  std::optional<Wildcard> bound;

  static PathSpec all() { return {}; }
  static PathSpec within(Wildcard w) { return {w}; }
  Wildcard resolve(std::span<const Sequence> log) const;
};

/// "all", "short" (uses `short_spec`), "long" (uses `long_spec`) or "[l;u]".
PathSpec parse_path_spec(std::string_view text, const Wildcard& short_spec,
                         const std::optional<Wildcard>& long_spec);

struct Measure {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 0;
  /// nullopt when the denominator is zero.
  std::optional<Ratio> value() const { return make_ratio(numerator, denominator); }
};

/// Sessions containing A over all sessions of `log`. A must be an action page.
Measure contact_efficiency(const ConceptId& a, const SessionLog& log, const ConceptHierarchy& h);

/// Sessions containing A over the active sessions of `log`.
Measure relative_contact_efficiency(const ConceptId& a, const SessionLog& log,
                                    const ConceptHierarchy& h);

/// Active sessions in which (T,1) follows (P,1) with a gap in the path group,
/// over active sessions containing P. T must be a target page.
Measure conversion_efficiency(const ConceptId& p, const ConceptId& t, const PathSpec& spec,
                              const SessionLog& log, const ConceptHierarchy& h);

/// Role-free core of the above over plain sequences.
Measure conversion_efficiency(const ConceptId& p, const ConceptId& t, const Wildcard& gap,
                              std::span<const Sequence> log);

struct EfficiencyRow {
  ConceptId concept_id;
  Measure contact;
  Measure relative_contact;
  std::optional<Measure> conversion_short;
  std::optional<Measure> conversion_all;
  std::optional<Measure> conversion_long;
};

struct TargetSpec {
  ConceptId target;
  Wildcard short_spec{0, 3};
  std::optional<Wildcard> long_spec;
};

struct EfficiencyTable {
  std::vector<EfficiencyRow> rows;

  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
};

/// One row per concept. Conversion columns are filled when `target` is set.
EfficiencyTable efficiency_table(const std::vector<ConceptId>& concepts,
                                 const std::optional<TargetSpec>& target, const SessionLog& log,
                                 const ConceptHierarchy& h);

/// Mappable action concepts of h in declaration order, optionally without the
/// default concept.
std::vector<ConceptId> action_concepts(const ConceptHierarchy& h, bool exclude_default);
/// Mappable target concepts of h in declaration order.
std::vector<ConceptId> target_concepts(const ConceptHierarchy& h);

/// Per-column change (after - before) in percentage points, rounded half-up
/// to one decimal; empty cells where either side is undefined.
std::string delta_csv(const EfficiencyTable& before, const EfficiencyTable& after);

}  // namespace wum
