#include "wum/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace wum {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::action: return "action";
    case Role::target: return "target";
    case Role::other: return "other";
  }
  return "other";
}

Role parse_role(std::string_view s) {
  if (s == "action") return Role::action;
  if (s == "target") return Role::target;
  if (s == "other") return Role::other;
  throw HierarchyError("unknown role: " + std::string(s));
}

namespace {

std::string join(const std::vector<std::string>& errors) {
  std::string out = "invalid concept hierarchy:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

}  // namespace

ConceptHierarchy::ConceptHierarchy(std::vector<Concept> concepts, std::vector<MappingRule> rules,
                                   ConceptId default_concept)
    : concepts_(std::move(concepts)), rules_(std::move(rules)),
      default_concept_(std::move(default_concept)) {
  std::vector<std::string> errors;
  if (concepts_.empty()) errors.push_back("concepts: list is empty");

  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    if (concepts_[i].id.empty()) {
      errors.push_back("concepts[" + std::to_string(i) + "]: empty id");
      continue;
    }
    if (!index_.emplace(concepts_[i].id, i).second) {
      errors.push_back("concepts[" + std::to_string(i) + "]: duplicate id '" + concepts_[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    const auto& c = concepts_[i];
    if (c.parent && index_.find(*c.parent) == index_.end()) {
      errors.push_back("concepts[" + std::to_string(i) + "]: unknown parent '" + *c.parent + "'");
    }
  }
  if (!errors.empty()) throw HierarchyError(join(errors));

  // Depth and role inheritance; a walk longer than the concept count is a cycle.
  std::vector<Role> declared(concepts_.size());
  std::vector<bool> has_role(concepts_.size());
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    declared[i] = concepts_[i].role;
    has_role[i] = concepts_[i].role != Role::other;
  }
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    std::size_t depth = 0;
    std::optional<Role> inherited;
    std::size_t cur = i;
    bool cyclic = false;
    while (concepts_[cur].parent) {
      cur = index_.at(*concepts_[cur].parent);
      if (++depth > concepts_.size()) {
        cyclic = true;
        break;
      }
      if (!inherited && has_role[cur]) inherited = declared[cur];
    }
    if (cyclic) {
      errors.push_back("concepts[" + std::to_string(i) + "]: cyclic parent links through '" +
                       concepts_[i].id + "'");
      continue;
    }
    concepts_[i].depth = depth;
    if (has_role[i] && inherited && *inherited != declared[i]) {
      errors.push_back("concepts[" + std::to_string(i) + "]: role '" +
                       std::string(to_string(declared[i])) + "' conflicts with inherited role '" +
                       std::string(to_string(*inherited)) + "'");
    }
    if (!has_role[i] && inherited) concepts_[i].role = *inherited;
  }

  if (index_.find(default_concept_) == index_.end()) {
    errors.push_back("default_concept: unknown concept '" + default_concept_ + "'");
  }
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    auto& r = rules_[i];
    r.priority = i;
    if (index_.find(r.concept_id) == index_.end()) {
      errors.push_back("rules[" + std::to_string(i) + "]: unknown concept '" + r.concept_id + "'");
    }
    if (r.kind == MappingRule::Kind::regex) {
      try {
        compiled_.emplace_back(r.pattern, std::regex::ECMAScript | std::regex::optimize);
      } catch (const std::regex_error& e) {
        errors.push_back("rules[" + std::to_string(i) + "]: bad regex '" + r.pattern + "': " + e.what());
        compiled_.emplace_back();
      }
    } else {
      compiled_.emplace_back();
    }
  }
  if (!errors.empty()) throw HierarchyError(join(errors));
}

bool ConceptHierarchy::contains(std::string_view id) const { return index_.find(id) != index_.end(); }

const Concept& ConceptHierarchy::get(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw HierarchyError("unknown concept '" + std::string(id) + "'");
  return concepts_[it->second];
}

const ConceptId& ConceptHierarchy::map_url(std::string_view url_path,
                                           const std::optional<std::string>& query_string) const {
  std::string target(url_path);
  if (query_string) target += "?" + *query_string;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    bool hit = false;
    switch (r.kind) {
      case MappingRule::Kind::prefix:
        hit = target.compare(0, r.pattern.size(), r.pattern) == 0;
        break;
      case MappingRule::Kind::suffix:
        hit = target.size() >= r.pattern.size() &&
              target.compare(target.size() - r.pattern.size(), r.pattern.size(), r.pattern) == 0;
        break;
      case MappingRule::Kind::regex:
        hit = std::regex_search(target, compiled_[i]);
        break;
    }
    if (hit) return r.concept_id;
  }
  return default_concept_;
}

Role ConceptHierarchy::role_of(std::string_view id) const { return get(id).role; }

const ConceptId& ConceptHierarchy::ancestor_at_level(std::string_view id, std::size_t level) const {
  const Concept* c = &get(id);
  if (level > c->depth) {
    throw HierarchyError("level " + std::to_string(level) + " exceeds depth " +
                         std::to_string(c->depth) + " of '" + std::string(id) + "'");
  }
  for (std::size_t d = c->depth; d > level; --d) c = &get(*c->parent);
  return c->id;
}

std::vector<ConceptId> ConceptHierarchy::concepts_with_role(Role r) const {
  std::vector<ConceptId> out;
  for (const auto& c : concepts_) {
    if (c.role == r) out.push_back(c.id);
  }
  return out;
}

bool ConceptHierarchy::is_leaf(std::string_view id) const {
  for (const auto& c : concepts_) {
    if (c.parent && *c.parent == id) return false;
  }
  return contains(id);
}

bool ConceptHierarchy::is_mappable(std::string_view id) const {
  if (id == default_concept_ || is_leaf(id)) return true;
  return std::any_of(rules_.begin(), rules_.end(),
                     [&](const MappingRule& r) { return r.concept_id == id; });
}

bool ConceptHierarchy::supports_success_analysis() const {
  bool action = false;
  bool target = false;
  for (const auto& c : concepts_) {
    action = action || c.role == Role::action;
    target = target || c.role == Role::target;
  }
  return action && target;
}

std::string ConceptHierarchy::to_json() const {
  nlohmann::ordered_json doc;
  doc["concepts"] = nlohmann::ordered_json::array();
  for (const auto& c : concepts_) {
    nlohmann::ordered_json j;
    j["id"] = c.id;
    j["parent"] = c.parent ? nlohmann::ordered_json(*c.parent) : nlohmann::ordered_json(nullptr);
    bool root_of_role = c.role != Role::other && (!c.parent || get(*c.parent).role != c.role);
    if (root_of_role) j["role"] = to_string(c.role);
    if (!c.label.empty()) j["label"] = c.label;
    doc["concepts"].push_back(j);
  }
  doc["rules"] = nlohmann::ordered_json::array();
  for (const auto& r : rules_) {
    const char* kind = r.kind == MappingRule::Kind::prefix   ? "prefix"
                       : r.kind == MappingRule::Kind::suffix ? "suffix"
                                                             : "regex";
    doc["rules"].push_back({{"match", {{kind, r.pattern}}}, {"concept", r.concept_id}});
  }
  doc["default_concept"] = default_concept_;
  return doc.dump(2);
}

ConceptHierarchy load_hierarchy(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw HierarchyError(std::string("hierarchy document is not valid JSON: ") + e.what());
  }
  std::vector<std::string> errors;
  if (!doc.is_object()) throw HierarchyError("hierarchy document must be a JSON object");

  std::vector<Concept> concepts;
  if (!doc.contains("concepts") || !doc["concepts"].is_array()) {
    errors.push_back("concepts: missing or not an array");
  } else {
    const auto& arr = doc["concepts"];
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& j = arr[i];
      std::string where = "concepts[" + std::to_string(i) + "]";
      if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
        errors.push_back(where + ": expected object with string 'id'");
        continue;
      }
      Concept c;
      c.id = j["id"].get<std::string>();
      c.label = j.value("label", c.id);
      if (j.contains("parent") && !j["parent"].is_null()) {
        if (!j["parent"].is_string()) {
          errors.push_back(where + ".parent: expected string or null");
          continue;
        }
        c.parent = j["parent"].get<std::string>();
      }
      if (j.contains("role")) {
        try {
          c.role = parse_role(j["role"].get<std::string>());
        } catch (const std::exception&) {
          errors.push_back(where + ".role: expected action|target|other");
        }
      }
      concepts.push_back(std::move(c));
    }
  }

  std::vector<MappingRule> rules;
  if (doc.contains("rules")) {
    if (!doc["rules"].is_array()) {
      errors.push_back("rules: not an array");
    } else {
      const auto& arr = doc["rules"];
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& j = arr[i];
        std::string where = "rules[" + std::to_string(i) + "]";
        if (!j.is_object() || !j.contains("match") || !j["match"].is_object() ||
            j["match"].size() != 1 || !j.contains("concept") || !j["concept"].is_string()) {
          errors.push_back(where + ": expected {match: {prefix|suffix|regex: text}, concept}");
          continue;
        }
        MappingRule r;
        auto it = j["match"].begin();
        if (it.key() == "prefix") {
          r.kind = MappingRule::Kind::prefix;
        } else if (it.key() == "suffix") {
          r.kind = MappingRule::Kind::suffix;
        } else if (it.key() == "regex") {
          r.kind = MappingRule::Kind::regex;
        } else {
          errors.push_back(where + ".match: unknown kind '" + it.key() + "'");
          continue;
        }
        if (!it.value().is_string()) {
          errors.push_back(where + ".match." + it.key() + ": expected string");
          continue;
        }
        r.pattern = it.value().get<std::string>();
        r.concept_id = j["concept"].get<std::string>();
        rules.push_back(std::move(r));
      }
    }
  }

  ConceptId default_concept;
  if (!doc.contains("default_concept") || !doc["default_concept"].is_string()) {
    errors.push_back("default_concept: missing or not a string");
  } else {
    default_concept = doc["default_concept"].get<std::string>();
  }
  if (!errors.empty()) throw HierarchyError(join(errors));
  return ConceptHierarchy(std::move(concepts), std::move(rules), std::move(default_concept));
}

ConceptHierarchy load_hierarchy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw HierarchyError("cannot open hierarchy file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_hierarchy(ss.str());
}

}  // namespace wum
