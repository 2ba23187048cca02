#pragma once

#include <cstdint>
#include <string_view>
#include <variant>

#include "wum/aggregate_tree.hpp"
#include "wum/core.hpp"

namespace wum {

/// Frequency threshold inside a pattern: absolute hits, or a fraction of the
/// root's hits in (0,1] (rounded up).
struct PostMinerConfig {
  std::variant<std::uint64_t, Ratio> thr = std::uint64_t{1};

  static PostMinerConfig absolute(std::uint64_t hits) { return {hits}; }
  static PostMinerConfig fraction(Ratio r) { return {r}; }
  /// "12" is absolute, "0.05" a fraction.
  static PostMinerConfig parse(std::string_view text);

  std::uint64_t absolute_for(std::uint64_t root_hits) const;
  void validate() const;
};

/// Removes rare sub-paths. Children of a node below the threshold are
/// reattached to its parent and same-page siblings are merged (hits, ends and
/// completed summed, flagged `merged`), repeatedly until no rare node has
/// children; remaining rare leaves are dropped. The root is always kept.
AggregateTree prune_and_merge(const AggregateTree& tree, const PostMinerConfig& cfg);

}  // namespace wum
