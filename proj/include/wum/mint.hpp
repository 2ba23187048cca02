#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wum/core.hpp"
#include "wum/taxonomy.hpp"

namespace wum::mint {

/// `#` anchors the first variable to the first page occurrence of a session.
/// `variables.size() == wildcards.size() + 1`; wildcards[i] sits between
/// variables[i] and variables[i + 1].
struct TemplateExpr {
  bool anchored = false;
  std::vector<std::string> variables;
  std::vector<Wildcard> wildcards;

  friend bool operator==(const TemplateExpr&, const TemplateExpr&) = default;
};

enum class UrlOp { contains, endswith, equals };
enum class Cmp { ge, le, eq };

std::string_view to_string(UrlOp op);
std::string_view to_string(Cmp c);
bool compare(const Ratio& lhs, Cmp c, const Ratio& rhs);

struct UrlConstraint {
  std::string variable;
  UrlOp op = UrlOp::contains;
  std::string literal;

  bool accepts(std::string_view url) const;
  friend bool operator==(const UrlConstraint&, const UrlConstraint&) = default;
};

struct OccurrenceConstraint {
  std::string variable;
  std::uint32_t value = 1;
  friend bool operator==(const OccurrenceConstraint&, const OccurrenceConstraint&) = default;
};

struct SupportConstraint {
  std::string variable;
  Cmp cmp = Cmp::ge;
  Ratio value;
  friend bool operator==(const SupportConstraint&, const SupportConstraint&) = default;
};

/// (numerator.support / denominator.support) cmp value
struct RatioConstraint {
  std::string numerator;
  std::string denominator;
  Cmp cmp = Cmp::ge;
  Ratio value;
  friend bool operator==(const RatioConstraint&, const RatioConstraint&) = default;
};

using Constraint =
    std::variant<UrlConstraint, OccurrenceConstraint, SupportConstraint, RatioConstraint>;

struct MintQuery {
  std::string selected;
  std::vector<std::string> variables;
  TemplateExpr templ;
  std::string alias;
  std::vector<Constraint> constraints;

  std::size_t variable_index(std::string_view name) const;
  friend bool operator==(const MintQuery&, const MintQuery&) = default;
};

/// Parse failure with a 1-based source position.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string message_;
};

/// Grammar (keywords case-insensitive):
///   select IDENT from node as IDENT+ , template [#] IDENT ( [ INT ; INT ] IDENT )*
///   as IDENT [ where CONSTRAINT ( and CONSTRAINT )* ]
/// CONSTRAINT:
///   v.url contains|endswith STRING | v.url = STRING
///   v.occurrence = INT            (also spelled `occurence`)
///   v.support >=|<=|= NUMBER
///   [(] v.support / w.support [)] >=|<= NUMBER     (NUMBER in [0,1])
MintQuery parse_query(std::string_view text);

/// Canonical single-line form; parse_query(print_query(q)) == q.
std::string print_query(const MintQuery& q);

/// Non-fatal problems: URL literals matching no concept, ratio constraints
/// whose numerator does not follow the denominator in template order.
std::vector<std::string> validate_query(const MintQuery& q, const ConceptHierarchy& h);

}  // namespace wum::mint
