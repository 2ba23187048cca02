#include "wum/aggregate_tree.hpp"

#include <algorithm>

#include "json.hpp"

namespace wum {

AggregateTree::AggregateTree() : AggregateTree(std::nullopt) {}

AggregateTree::AggregateTree(std::optional<PageOccurrence> root_page) {
  nodes_.push_back(Node{std::move(root_page), 0, 0, 0, false, {}});
}

std::optional<AggregateTree::NodeId> AggregateTree::find_child(NodeId parent,
                                                               const PageOccurrence& page) const {
  for (NodeId c : nodes_[parent].children) {
    if (nodes_[c].page == page) return c;
  }
  return std::nullopt;
}

AggregateTree::NodeId AggregateTree::child(NodeId parent, const PageOccurrence& page) {
  if (auto c = find_child(parent, page)) return *c;
  return add_child(parent, Node{page, 0, 0, 0, false, {}});
}

AggregateTree::NodeId AggregateTree::add_child(NodeId parent, Node n) {
  nodes_.push_back(std::move(n));
  NodeId id = nodes_.size() - 1;
  nodes_[parent].children.push_back(id);
  return id;
}

void AggregateTree::insert(std::span<const PageOccurrence> seq, std::uint64_t count) {
  NodeId cur = root_id;
  nodes_[cur].hits += count;
  for (const auto& p : seq) {
    cur = child(cur, p);
    nodes_[cur].hits += count;
  }
  nodes_[cur].ends += count;
}

void AggregateTree::normalize() {
  std::vector<Node> out;
  out.reserve(nodes_.size());
  // Copy reachable nodes breadth-first with canonically ordered children.
  out.push_back(nodes_[root_id]);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto kids = out[i].children;
    std::sort(kids.begin(), kids.end(), [&](NodeId a, NodeId b) {
      const Node& x = nodes_[a];
      const Node& y = nodes_[b];
      if (x.hits != y.hits) return x.hits > y.hits;
      return x.page < y.page;
    });
    out[i].children.clear();
    for (NodeId k : kids) {
      out.push_back(nodes_[k]);
      out[i].children.push_back(out.size() - 1);
    }
  }
  nodes_ = std::move(out);
}

void AggregateTree::validate() const {
  std::string problem;
  visit([&](NodeId id, const Node& n, std::size_t depth) {
    if (!problem.empty()) return;
    std::string where = n.page ? to_string(*n.page) : std::string("<root>");
    if (depth > 0 && !n.page) problem = "non-root node without page occurrence";
    if (depth > 0 && n.hits == 0) problem = "node " + where + " has zero hits";
    if (n.page && n.page->occurrence == 0) problem = "node " + where + " has occurrence 0";
    std::uint64_t below = n.ends;
    for (NodeId c : n.children) below += nodes_[c].hits;
    if (below > n.hits) {
      problem = "node " + where + " has hits " + std::to_string(n.hits) +
                " below ends + children hits " + std::to_string(below);
    }
    if (n.completed > n.hits) problem = "node " + where + " has completed > hits";
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      for (std::size_t j = i + 1; j < n.children.size(); ++j) {
        if (nodes_[n.children[i]].page == nodes_[n.children[j]].page) {
          problem = "node " + where + " has duplicate children";
        }
      }
    }
    (void)id;
  });
  if (!problem.empty()) throw Error("invalid aggregate tree: " + problem);
}

namespace {

bool equal_subtree(const AggregateTree& a, AggregateTree::NodeId x, const AggregateTree& b,
                   AggregateTree::NodeId y) {
  const auto& n = a.node(x);
  const auto& m = b.node(y);
  if (n.page != m.page || n.hits != m.hits || n.ends != m.ends || n.completed != m.completed ||
      n.merged != m.merged || n.children.size() != m.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (!equal_subtree(a, n.children[i], b, m.children[i])) return false;
  }
  return true;
}

nlohmann::ordered_json node_to_json(const AggregateTree& t, AggregateTree::NodeId id) {
  const auto& n = t.node(id);
  nlohmann::ordered_json j;
  if (n.page) {
    j["concept"] = n.page->concept_id;
    j["occ"] = n.page->occurrence;
  } else {
    j["concept"] = nullptr;
    j["occ"] = 0;
  }
  j["hits"] = n.hits;
  j["ends"] = n.ends;
  if (n.completed != 0) j["completed"] = n.completed;
  if (n.merged) j["merged"] = true;
  j["children"] = nlohmann::ordered_json::array();
  for (auto c : n.children) j["children"].push_back(node_to_json(t, c));
  return j;
}

AggregateTree::Node node_fields(const nlohmann::json& j) {
  AggregateTree::Node n;
  if (!j.is_object()) throw Error("tree node must be an object");
  const auto& concept_field = j.at("concept");
  if (!concept_field.is_null()) {
    n.page = PageOccurrence{concept_field.get<std::string>(), j.at("occ").get<std::uint32_t>()};
  }
  n.hits = j.at("hits").get<std::uint64_t>();
  n.ends = j.at("ends").get<std::uint64_t>();
  n.completed = j.value("completed", std::uint64_t{0});
  n.merged = j.value("merged", false);
  return n;
}

void children_from_json(AggregateTree& t, AggregateTree::NodeId parent, const nlohmann::json& j) {
  for (const auto& c : j.at("children")) {
    auto id = t.add_child(parent, node_fields(c));
    children_from_json(t, id, c);
  }
}

}  // namespace

bool operator==(const AggregateTree& a, const AggregateTree& b) {
  return equal_subtree(a, AggregateTree::root_id, b, AggregateTree::root_id);
}

std::string AggregateTree::to_json(int indent) const { return to_json_value().dump(indent); }

nlohmann::ordered_json AggregateTree::to_json_value() const { return node_to_json(*this, root_id); }

AggregateTree AggregateTree::from_json(std::string_view document) {
  try {
    auto j = nlohmann::json::parse(document);
    auto root = node_fields(j);
    AggregateTree t(root.page);
    t.root().hits = root.hits;
    t.root().ends = root.ends;
    t.root().completed = root.completed;
    t.root().merged = root.merged;
    children_from_json(t, root_id, j);
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed aggregate tree document: ") + e.what());
  }
}

AggregateTree build_aggregated_log(std::span<const Sequence> log) {
  AggregateTree t;
  for (const auto& s : log) t.insert(s);
  t.normalize();
  return t;
}

std::uint64_t prefix_hits(const AggregateTree& tree, std::span<const PageOccurrence> prefix) {
  AggregateTree::NodeId cur = AggregateTree::root_id;
  for (const auto& p : prefix) {
    auto c = tree.find_child(cur, p);
    if (!c) return 0;
    cur = *c;
  }
  return tree.node(cur).hits;
}

}  // namespace wum
