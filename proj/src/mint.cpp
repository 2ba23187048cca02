#include "wum/mint.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace wum::mint {

std::string_view to_string(UrlOp op) {
  switch (op) {
    case UrlOp::contains: return "contains";
    case UrlOp::endswith: return "endswith";
    case UrlOp::equals: return "=";
  }
  return "contains";
}

std::string_view to_string(Cmp c) {
  switch (c) {
    case Cmp::ge: return ">=";
    case Cmp::le: return "<=";
    case Cmp::eq: return "=";
  }
  return ">=";
}

bool compare(const Ratio& lhs, Cmp c, const Ratio& rhs) {
  switch (c) {
    case Cmp::ge: return lhs >= rhs;
    case Cmp::le: return lhs <= rhs;
    case Cmp::eq: return lhs == rhs;
  }
  return false;
}

bool UrlConstraint::accepts(std::string_view url) const {
  switch (op) {
    case UrlOp::contains: return url.find(literal) != std::string_view::npos;
    case UrlOp::endswith:
      return url.size() >= literal.size() && url.substr(url.size() - literal.size()) == literal;
    case UrlOp::equals: return url == literal;
  }
  return false;
}

std::size_t MintQuery::variable_index(std::string_view name) const {
  auto it = std::find(templ.variables.begin(), templ.variables.end(), name);
  if (it == templ.variables.end()) throw Error("unknown variable '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - templ.variables.begin());
}

SyntaxError::SyntaxError(std::size_t line, std::size_t column, const std::string& message)
    : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line), column_(column), message_(message) {}

namespace {

enum class Tok { ident, number, string, punct, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t line = 1;
  std::size_t col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      t.kind = Tok::number;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (c == '"') {
      t.kind = Tok::string;
      advance(1);
      bool closed = false;
      while (i < src.size()) {
        char d = src[i];
        if (d == '\\' && i + 1 < src.size()) {
          t.text += src[i + 1];
          advance(2);
        } else if (d == '"') {
          advance(1);
          closed = true;
          break;
        } else {
          t.text += d;
          advance(1);
        }
      }
      if (!closed) throw SyntaxError(t.line, t.column, "unterminated string literal");
    } else if ((c == '>' || c == '<') && i + 1 < src.size() && src[i + 1] == '=') {
      t.kind = Tok::punct;
      t.text = std::string(src.substr(i, 2));
      advance(2);
    } else if (std::string_view("#[];,.()/=").find(c) != std::string_view::npos) {
      t.kind = Tok::punct;
      t.text = std::string(1, c);
      advance(1);
    } else {
      throw SyntaxError(line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

  MintQuery parse() {
    MintQuery q;
    keyword("select");
    q.selected = ident("template alias").text;
    keyword("from");
    keyword("node");
    keyword("as");
    std::vector<Token> declared;
    do {
      declared.push_back(ident("variable name"));
    } while (peek().kind == Tok::ident);
    punct(",");
    keyword("template");
    if (peek_punct("#")) {
      next();
      q.templ.anchored = true;
    }
    std::vector<Token> used;
    used.push_back(ident("template variable"));
    while (peek_punct("[")) {
      Token open = next();
      auto lo = integer("wildcard lower bound");
      punct(";");
      auto hi = integer("wildcard upper bound");
      punct("]");
      if (lo > hi) {
        throw SyntaxError(open.line, open.column,
                          "wildcard lower bound " + std::to_string(lo) + " exceeds upper bound " +
                              std::to_string(hi));
      }
      q.templ.wildcards.push_back(Wildcard{lo, hi});
      used.push_back(ident("template variable"));
    }
    if (peek_punct("#")) fail(peek(), "'#' may only anchor the first template variable");
    keyword("as");
    Token alias = ident("template alias");
    q.alias = alias.text;

    std::set<std::string> names;
    for (const auto& t : declared) {
      if (!names.insert(t.text).second) fail(t, "duplicate variable '" + t.text + "'");
      q.variables.push_back(t.text);
    }
    for (const auto& t : used) q.templ.variables.push_back(t.text);
    if (q.templ.variables != q.variables) {
      fail(used.front(), "template variables must match the declared variables in order");
    }
    if (q.alias != q.selected) {
      fail(alias, "template alias '" + q.alias + "' does not match selected '" + q.selected + "'");
    }

    if (peek_keyword("where")) {
      next();
      q.constraints.push_back(constraint(q));
      while (peek_keyword("and")) {
        next();
        q.constraints.push_back(constraint(q));
      }
    }
    if (peek().kind != Tok::end) fail(peek(), "unexpected '" + peek().text + "'");
    return q;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw SyntaxError(t.line, t.column, msg);
  }

  std::string describe(const Token& t) const {
    return t.kind == Tok::end ? std::string("end of query") : "'" + t.text + "'";
  }

  bool peek_keyword(std::string_view kw) const {
    return peek().kind == Tok::ident && lower(peek().text) == kw;
  }
  bool peek_punct(std::string_view p) const { return peek().kind == Tok::punct && peek().text == p; }

  void keyword(std::string_view kw) {
    if (!peek_keyword(kw)) fail(peek(), "expected '" + std::string(kw) + "', found " + describe(peek()));
    next();
  }
  void punct(std::string_view p) {
    if (!peek_punct(p)) fail(peek(), "expected '" + std::string(p) + "', found " + describe(peek()));
    next();
  }
  Token ident(std::string_view what) {
    if (peek().kind != Tok::ident) fail(peek(), "expected " + std::string(what) + ", found " + describe(peek()));
    return next();
  }
  std::uint32_t integer(std::string_view what) {
    const Token& t = peek();
    std::uint32_t v = 0;
    if (t.kind != Tok::number ||
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v).ptr !=
            t.text.data() + t.text.size()) {
      fail(t, "expected " + std::string(what) + " (non-negative integer), found " + describe(t));
    }
    next();
    return v;
  }
  Ratio number() {
    if (peek().kind != Tok::number) fail(peek(), "expected number, found " + describe(peek()));
    return parse_decimal(next().text);
  }

  Token variable(const MintQuery& q) {
    Token t = ident("variable");
    if (std::find(q.variables.begin(), q.variables.end(), t.text) == q.variables.end()) {
      fail(t, "unknown variable '" + t.text + "'");
    }
    return t;
  }

  std::string attribute() {
    punct(".");
    Token a = ident("attribute");
    auto name = lower(a.text);
    if (name == "occurence") name = "occurrence";
    if (name != "url" && name != "occurrence" && name != "support") {
      fail(a, "unknown attribute '" + a.text + "' (expected url, occurrence or support)");
    }
    return name;
  }

  Cmp comparison(bool allow_eq) {
    Token t = peek();
    if (t.kind == Tok::punct && (t.text == ">=" || t.text == "<=" || (allow_eq && t.text == "="))) {
      next();
      return t.text == ">=" ? Cmp::ge : t.text == "<=" ? Cmp::le : Cmp::eq;
    }
    fail(t, std::string("expected ") + (allow_eq ? "'>=', '<=' or '='" : "'>=' or '<='") +
                ", found " + describe(t));
  }

  RatioConstraint ratio_tail(const MintQuery& q, const Token& num, bool parenthesized) {
    punct("/");
    Token den = variable(q);
    if (attribute() != "support") fail(den, "ratio constraints divide support attributes");
    if (parenthesized) punct(")");
    RatioConstraint r;
    r.numerator = num.text;
    r.denominator = den.text;
    r.cmp = comparison(false);
    Token at = peek();
    r.value = number();
    if (r.value > Ratio{1, 1}) fail(at, "ratio threshold must lie in [0,1]");
    return r;
  }

  Constraint constraint(const MintQuery& q) {
    if (peek_punct("(")) {
      next();
      Token num = variable(q);
      if (attribute() != "support") fail(num, "ratio constraints divide support attributes");
      return ratio_tail(q, num, true);
    }
    Token v = variable(q);
    auto attr = attribute();
    if (attr == "url") {
      UrlConstraint c;
      c.variable = v.text;
      if (peek_keyword("contains")) {
        c.op = UrlOp::contains;
      } else if (peek_keyword("endswith")) {
        c.op = UrlOp::endswith;
      } else if (peek_punct("=")) {
        c.op = UrlOp::equals;
      } else {
        fail(peek(), "expected 'contains', 'endswith' or '=', found " + describe(peek()));
      }
      next();
      if (peek().kind != Tok::string) fail(peek(), "expected string literal, found " + describe(peek()));
      c.literal = next().text;
      return c;
    }
    if (attr == "occurrence") {
      punct("=");
      Token at = peek();
      auto value = integer("occurrence number");
      if (value == 0) fail(at, "occurrence numbers start at 1");
      return OccurrenceConstraint{v.text, value};
    }
    if (peek_punct("/")) return ratio_tail(q, v, false);
    SupportConstraint s;
    s.variable = v.text;
    s.cmp = comparison(true);
    s.value = number();
    return s;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

MintQuery parse_query(std::string_view text) { return Parser(text).parse(); }

std::string print_query(const MintQuery& q) {
  std::string out = "select " + q.selected + " from node as";
  for (const auto& v : q.variables) out += " " + v;
  out += ", template ";
  if (q.templ.anchored) out += "# ";
  for (std::size_t i = 0; i < q.templ.variables.size(); ++i) {
    if (i > 0) out += " " + to_string(q.templ.wildcards[i - 1]) + " ";
    out += q.templ.variables[i];
  }
  out += " as " + q.alias;
  for (std::size_t i = 0; i < q.constraints.size(); ++i) {
    out += i == 0 ? " where " : " and ";
    std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, UrlConstraint>) {
            out += c.variable + ".url " + std::string(to_string(c.op)) + " " + quote(c.literal);
          } else if constexpr (std::is_same_v<T, OccurrenceConstraint>) {
            out += c.variable + ".occurrence = " + std::to_string(c.value);
          } else if constexpr (std::is_same_v<T, SupportConstraint>) {
            out += c.variable + ".support " + std::string(to_string(c.cmp)) + " " + format_decimal(c.value);
          } else {
            out += "(" + c.numerator + ".support / " + c.denominator + ".support) " +
                   std::string(to_string(c.cmp)) + " " + format_decimal(c.value);
          }
        },
        q.constraints[i]);
  }
  return out;
}

std::vector<std::string> validate_query(const MintQuery& q, const ConceptHierarchy& h) {
  std::vector<std::string> warnings;
  for (const auto& c : q.constraints) {
    if (const auto* u = std::get_if<UrlConstraint>(&c)) {
      bool any = std::any_of(h.concepts().begin(), h.concepts().end(),
                             [&](const Concept& k) { return u->accepts(k.id); });
      if (!any) {
        warnings.push_back("constraint on " + u->variable + ".url " + std::string(to_string(u->op)) +
                           " " + quote(u->literal) + " matches no concept of the hierarchy");
      }
    } else if (const auto* r = std::get_if<RatioConstraint>(&c)) {
      if (q.variable_index(r->numerator) <= q.variable_index(r->denominator)) {
        warnings.push_back("ratio " + r->numerator + ".support / " + r->denominator +
                           ".support: numerator should follow the denominator in template order");
      }
    }
  }
  return warnings;
}

}  // namespace wum::mint
