#include "wum/postminer.hpp"

#include <algorithm>
#include <map>

namespace wum {

PostMinerConfig PostMinerConfig::parse(std::string_view text) {
  auto r = parse_decimal(text);
  PostMinerConfig cfg;
  if (text.find('.') == std::string_view::npos) {
    cfg.thr = r.num;
  } else {
    cfg.thr = r;
  }
  cfg.validate();
  return cfg;
}

void PostMinerConfig::validate() const {
  if (const auto* a = std::get_if<std::uint64_t>(&thr)) {
    if (*a == 0) throw Error("post-miner threshold must be a positive integer");
  } else {
    const auto& r = std::get<Ratio>(thr);
    if (r.num == 0 || r > Ratio{1, 1}) throw Error("fractional post-miner threshold must lie in (0,1]");
  }
}

std::uint64_t PostMinerConfig::absolute_for(std::uint64_t root_hits) const {
  if (const auto* a = std::get_if<std::uint64_t>(&thr)) return *a;
  const auto& r = std::get<Ratio>(thr);
  auto scaled = static_cast<unsigned __int128>(r.num) * root_hits;
  auto t = static_cast<std::uint64_t>((scaled + r.den - 1) / r.den);
  return std::max<std::uint64_t>(t, 1);
}

namespace {

struct Work {
  AggregateTree::Node fields;  // children unused
  std::vector<Work> children;
};

Work load(const AggregateTree& t, AggregateTree::NodeId id) {
  Work w;
  w.fields = t.node(id);
  w.fields.children.clear();
  for (auto c : t.node(id).children) w.children.push_back(load(t, c));
  return w;
}

void store(AggregateTree& t, AggregateTree::NodeId parent, const Work& w) {
  for (const auto& c : w.children) {
    auto id = t.add_child(parent, c.fields);
    store(t, id, c);
  }
}

/// Merges same-page entries of `kids`, recursively merging their children.
void merge_siblings(std::vector<Work>& kids) {
  std::map<PageOccurrence, std::size_t> first;
  std::vector<Work> out;
  for (auto& k : kids) {
    auto [it, fresh] = first.emplace(*k.fields.page, out.size());
    if (fresh) {
      out.push_back(std::move(k));
      continue;
    }
    auto& into = out[it->second];
    into.fields.hits += k.fields.hits;
    into.fields.ends += k.fields.ends;
    into.fields.completed += k.fields.completed;
    into.fields.merged = true;
    for (auto& g : k.children) into.children.push_back(std::move(g));
  }
  for (auto& o : out) {
    if (o.fields.merged) merge_siblings(o.children);
  }
  kids = std::move(out);
}

void prune(Work& node, std::uint64_t thr) {
  merge_siblings(node.children);
  while (true) {
    auto rare_inner = std::find_if(node.children.begin(), node.children.end(), [&](const Work& c) {
      return c.fields.hits < thr && !c.children.empty();
    });
    if (rare_inner == node.children.end()) break;
    std::vector<Work> next;
    for (auto& c : node.children) {
      if (c.fields.hits < thr && !c.children.empty()) {
        for (auto& g : c.children) next.push_back(std::move(g));
      } else {
        next.push_back(std::move(c));
      }
    }
    node.children = std::move(next);
    merge_siblings(node.children);
  }
  std::erase_if(node.children, [&](const Work& c) { return c.fields.hits < thr; });
  for (auto& c : node.children) prune(c, thr);
}

}  // namespace

AggregateTree prune_and_merge(const AggregateTree& tree, const PostMinerConfig& cfg) {
  cfg.validate();
  auto thr = cfg.absolute_for(tree.root().hits);
  Work root = load(tree, AggregateTree::root_id);
  prune(root, thr);
  AggregateTree out(root.fields.page);
  auto& r = out.root();
  r.hits = root.fields.hits;
  r.ends = root.fields.ends;
  r.completed = root.fields.completed;
  r.merged = root.fields.merged;
  store(out, AggregateTree::root_id, root);
  out.normalize();
  return out;
}

}  // namespace wum
