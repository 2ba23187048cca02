#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wum/core.hpp"
#include "wum/sessionizer.hpp"
#include "wum/taxonomy.hpp"

namespace wum {

struct StrategySpec {
  ConceptId concept_id;
  /// Fraction of customer sessions invoking the strategy.
  Ratio share;
  /// Fraction of those sessions reaching the success page within [0;3].
  Ratio conversion;
  /// Fraction of non-customer sessions invoking it; defaults to `share`.
  std::optional<Ratio> noncustomer_share;
};

/// Session counts are derived from the shares by half-up rounding. Shares of
/// one group may add up to more than 1 (some sessions then invoke two
/// strategies) but not to more than 2; sessions left without a strategy
/// invoke `filler_strategy`.
struct ScenarioSpec {
  std::uint64_t seed = 1;
  std::uint64_t sessions = 1000;
  Ratio inactive_share{1, 5};
  /// Fraction of the active sessions that are customers.
  Ratio customer_share{1, 2};
  std::vector<StrategySpec> strategies;
  ConceptId success = "/SUCCESS";
  ConceptId filler_strategy = "SEITE1-MISC";

  void validate() const;
};

ScenarioSpec parse_scenario(std::string_view json_text);
ScenarioSpec load_scenario_file(const std::string& path);

struct StrategyTruth {
  ConceptId concept_id;
  std::uint64_t customer_sessions = 0;
  std::uint64_t short_conversions = 0;
  std::uint64_t noncustomer_sessions = 0;
};

/// Counts of the realized log, tallied while constructing it.
struct GroundTruth {
  std::uint64_t all = 0;
  std::uint64_t active = 0;
  std::uint64_t inactive = 0;
  std::uint64_t customer = 0;
  std::uint64_t noncustomer = 0;
  std::vector<StrategyTruth> strategies;

  nlohmann::ordered_json to_json() const;
};

struct GeneratedScenario {
  SessionLog log;
  GroundTruth truth;
};

/// Deterministic for a given spec (seed included).
GeneratedScenario generate(const ScenarioSpec& spec);

/// Hierarchy declaring the scenario's concepts: strategies as action pages,
/// the success page as target.
ConceptHierarchy scenario_hierarchy(const ScenarioSpec& spec);

}  // namespace wum
