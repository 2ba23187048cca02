#pragma once

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "wum/core.hpp"

namespace wum {

enum class Role { action, target, other };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

struct Concept {
  ConceptId id;
  std::string label;
  std::optional<ConceptId> parent;
  Role role = Role::other;
  std::size_t depth = 0;
};

struct MappingRule {
  enum class Kind { prefix, suffix, regex };
  Kind kind = Kind::prefix;
  std::string pattern;
  ConceptId concept_id;
  std::size_t priority = 0;
};

class HierarchyError : public Error {
 public:
  using Error::Error;
};

/// Service-based concept hierarchy with URL mapping rules. Immutable after
/// construction; all lookups are const and thread-safe.
class ConceptHierarchy {
 public:
  /// Validates and builds. Roles declared on a concept apply to its whole
  /// subtree; undeclared subtrees are `other`.
  ConceptHierarchy(std::vector<Concept> concepts, std::vector<MappingRule> rules,
                   ConceptId default_concept);

  const std::vector<Concept>& concepts() const { return concepts_; }
  const std::vector<MappingRule>& rules() const { return rules_; }
  const ConceptId& default_concept() const { return default_concept_; }

  bool contains(std::string_view id) const;
  const Concept& get(std::string_view id) const;

  /// First matching rule in priority order wins; no match maps to the default
  /// concept. Rules are matched against "path?query" when a query is present.
  const ConceptId& map_url(std::string_view url_path,
                           const std::optional<std::string>& query_string) const;
  Role role_of(std::string_view id) const;
  /// Ancestor at depth `level` from the concept's root (level 0 = root).
  const ConceptId& ancestor_at_level(std::string_view id, std::size_t level) const;

  std::vector<ConceptId> concepts_with_role(Role r) const;
  bool is_leaf(std::string_view id) const;
  /// Leaves, rule targets and the default concept: the concepts a URL can
  /// map to, hence the only ones sessions contain.
  bool is_mappable(std::string_view id) const;
  /// True when at least one action and one target concept exist.
  bool supports_success_analysis() const;

  /// Document form accepted by load_hierarchy.
  std::string to_json() const;

 private:
  std::vector<Concept> concepts_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<MappingRule> rules_;
  std::vector<std::regex> compiled_;
  ConceptId default_concept_;
};

/// Parses the JSON hierarchy document. Throws HierarchyError listing every
/// validation problem with its location in the document.
ConceptHierarchy load_hierarchy(std::string_view document);
ConceptHierarchy load_hierarchy_file(const std::string& path);

}  // namespace wum
