#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wum/core.hpp"

namespace wum {

/// Prefix-merged, hit-annotated tree of page-occurrence sequences.
///
/// Used both for the stored Aggregated Log (root is a synthetic super-root
/// without a page, its hits equal the number of sequences) and for the trees
/// of a navigation pattern (root is the bound page occurrence).
///
/// Node annotations:
///   hits      sequences passing through the node
///   ends      sequences whose aggregated path terminates exactly here
///   completed pattern trees only: paths that reached the next bound element
///             at this node
///   merged    produced by post-mining merges (drawn dashed)
///
/// Invariant: hits >= ends + sum(hits of children) for every node, and
/// non-root nodes have hits > 0. Children are kept in canonical order
/// (descending hits, then page occurrence) once normalize() has run.
class AggregateTree {
 public:
  using NodeId = std::size_t;
  static constexpr NodeId root_id = 0;

  struct Node {
    std::optional<PageOccurrence> page;
    std::uint64_t hits = 0;
    std::uint64_t ends = 0;
    std::uint64_t completed = 0;
    bool merged = false;
    std::vector<NodeId> children;
  };

  /// Tree with a super-root and no sequences.
  AggregateTree();
  /// Tree whose root carries `root_page`.
  explicit AggregateTree(std::optional<PageOccurrence> root_page);

  const Node& node(NodeId id) const { return nodes_[id]; }
  Node& node(NodeId id) { return nodes_[id]; }
  const Node& root() const { return nodes_[root_id]; }
  Node& root() { return nodes_[root_id]; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Child of `parent` carrying `page`, created (with zero counts) if absent.
  NodeId child(NodeId parent, const PageOccurrence& page);
  std::optional<NodeId> find_child(NodeId parent, const PageOccurrence& page) const;
  NodeId add_child(NodeId parent, Node n);

  /// Adds one sequence (with multiplicity) below the root.
  void insert(std::span<const PageOccurrence> seq, std::uint64_t count = 1);

  /// Sorts children canonically and drops unreachable nodes.
  void normalize();

  /// Throws Error describing the first violated invariant.
  void validate() const;

  /// Structural equality over the reachable tree, child order included.
  friend bool operator==(const AggregateTree& a, const AggregateTree& b);

  std::string to_json(int indent = -1) const;
  nlohmann::ordered_json to_json_value() const;
  static AggregateTree from_json(std::string_view document);

  /// Depth-first (pre-order) visit of reachable nodes with their depth.
  template <typename F>
  void visit(F&& f) const {
    visit_impl(root_id, 0, f);
  }

 private:
  template <typename F>
  void visit_impl(NodeId id, std::size_t depth, F& f) const {
    f(id, nodes_[id], depth);
    for (NodeId c : nodes_[id].children) visit_impl(c, depth + 1, f);
  }

  std::vector<Node> nodes_;
};

/// Builds the Aggregated Log of a multiset of occurrence-numbered sequences.
AggregateTree build_aggregated_log(std::span<const Sequence> log);

/// Number of sequences beginning with exactly this consecutive prefix.
std::uint64_t prefix_hits(const AggregateTree& tree, std::span<const PageOccurrence> prefix);

}  // namespace wum
