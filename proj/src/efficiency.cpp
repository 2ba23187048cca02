#include "wum/efficiency.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace wum {

Wildcard PathSpec::resolve(std::span<const Sequence> log) const {
  if (bound) return *bound;
  std::size_t longest = 0;
  for (const auto& s : log) longest = std::max(longest, s.size());
  return Wildcard{0, static_cast<std::uint32_t>(longest)};
}

PathSpec parse_path_spec(std::string_view text, const Wildcard& short_spec,
                         const std::optional<Wildcard>& long_spec) {
  if (text == "all") return PathSpec::all();
  if (text == "short") return PathSpec::within(short_spec);
  if (text == "long") {
    if (!long_spec) throw Error("no long path spec configured");
    return PathSpec::within(*long_spec);
  }
  auto semi = text.find(';');
  if (text.size() >= 5 && text.front() == '[' && text.back() == ']' && semi != std::string_view::npos) {
    Wildcard w;
    auto lo = text.substr(1, semi - 1);
    auto hi = text.substr(semi + 1, text.size() - semi - 2);
    auto a = std::from_chars(lo.data(), lo.data() + lo.size(), w.lower);
    auto b = std::from_chars(hi.data(), hi.data() + hi.size(), w.upper);
    if (a.ec == std::errc() && a.ptr == lo.data() + lo.size() && b.ec == std::errc() &&
        b.ptr == hi.data() + hi.size() && w.lower <= w.upper) {
      return PathSpec::within(w);
    }
  }
  throw Error("unknown path spec '" + std::string(text) + "' (expected all, short, long or [l;u])");
}

namespace {

void require_role(const ConceptHierarchy& h, const ConceptId& c, Role r) {
  if (!h.contains(c)) throw Error("unknown concept '" + c + "'");
  if (h.role_of(c) != r) {
    throw Error("concept '" + c + "' is not a" + (r == Role::action ? "n " : " ") +
                std::string(to_string(r)) + " page");
  }
}

bool contains_concept(const Session& s, const ConceptId& c) {
  return std::any_of(s.elements.begin(), s.elements.end(),
                     [&](const SessionElement& e) { return e.page.concept_id == c; });
}

std::optional<std::size_t> position_of(const Sequence& s, const PageOccurrence& p) {
  auto it = std::find(s.begin(), s.end(), p);
  if (it == s.end()) return std::nullopt;
  return static_cast<std::size_t>(it - s.begin());
}

}  // namespace

Measure contact_efficiency(const ConceptId& a, const SessionLog& log, const ConceptHierarchy& h) {
  require_role(h, a, Role::action);
  Measure m;
  m.denominator = log.size();
  for (const auto& s : log.sessions()) m.numerator += contains_concept(s, a) ? 1 : 0;
  return m;
}

Measure relative_contact_efficiency(const ConceptId& a, const SessionLog& log,
                                    const ConceptHierarchy& h) {
  return contact_efficiency(a, log.active(), h);
}

Measure conversion_efficiency(const ConceptId& p, const ConceptId& t, const Wildcard& gap,
                              std::span<const Sequence> log) {
  Measure m;
  const PageOccurrence start{p, 1};
  const PageOccurrence target{t, 1};
  for (const auto& s : log) {
    auto i = position_of(s, start);
    if (!i) continue;
    ++m.denominator;
    auto j = position_of(s, target);
    if (j && *j > *i && gap.admits(*j - *i - 1)) ++m.numerator;
  }
  return m;
}

Measure conversion_efficiency(const ConceptId& p, const ConceptId& t, const PathSpec& spec,
                              const SessionLog& log, const ConceptHierarchy& h) {
  require_role(h, t, Role::target);
  if (!h.contains(p)) throw Error("unknown concept '" + p + "'");
  auto active = log.active().sequences();
  return conversion_efficiency(p, t, spec.resolve(active), active);
}

std::vector<ConceptId> action_concepts(const ConceptHierarchy& h, bool exclude_default) {
  auto out = h.concepts_with_role(Role::action);
  std::erase_if(out, [&](const ConceptId& c) {
    return !h.is_mappable(c) || (exclude_default && c == h.default_concept());
  });
  return out;
}

std::vector<ConceptId> target_concepts(const ConceptHierarchy& h) {
  auto out = h.concepts_with_role(Role::target);
  std::erase_if(out, [&](const ConceptId& c) { return !h.is_mappable(c); });
  return out;
}

EfficiencyTable efficiency_table(const std::vector<ConceptId>& concepts,
                                 const std::optional<TargetSpec>& target, const SessionLog& log,
                                 const ConceptHierarchy& h) {
  EfficiencyTable table;
  auto active = log.active();
  auto active_seqs = active.sequences();
  if (target) require_role(h, target->target, Role::target);
  for (const auto& c : concepts) {
    EfficiencyRow row;
    row.concept_id = c;
    row.contact = contact_efficiency(c, log, h);
    row.relative_contact = contact_efficiency(c, active, h);
    if (target) {
      const auto& t = target->target;
      row.conversion_short = conversion_efficiency(c, t, target->short_spec, active_seqs);
      row.conversion_all =
          conversion_efficiency(c, t, PathSpec::all().resolve(active_seqs), active_seqs);
      if (target->long_spec) {
        row.conversion_long = conversion_efficiency(c, t, *target->long_spec, active_seqs);
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

std::string percent_cell(const std::optional<Measure>& m) {
  if (!m) return "";
  auto v = m->value();
  return v ? format_percent(*v) : "";
}

nlohmann::ordered_json measure_json(const std::optional<Measure>& m) {
  if (!m) return nullptr;
  nlohmann::ordered_json j;
  j["num"] = m->numerator;
  j["den"] = m->denominator;
  auto v = m->value();
  if (v) {
    j["value"] = v->value();
    j["percent"] = format_percent(*v);
  } else {
    j["value"] = nullptr;
  }
  return j;
}

std::optional<double> percent_value(const std::optional<Measure>& m) {
  if (!m) return std::nullopt;
  auto v = m->value();
  if (!v) return std::nullopt;
  return v->value() * 100.0;
}

std::string signed_tenths(double points) {
  // half-up on the magnitude, sign kept
  double mag = points < 0 ? -points : points;
  auto tenths = static_cast<long long>(mag * 10.0 + 0.5 + 1e-9);
  std::string out = points < 0 && tenths != 0 ? "-" : "+";
  return out + std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

}  // namespace

std::string EfficiencyTable::to_csv() const {
  std::ostringstream out;
  out << "concept,contact,relative_contact,conversion_short,conversion_all,conversion_long,"
         "denominator_contact,denominator_relative_contact,denominator_conversion\n";
  for (const auto& r : rows) {
    std::optional<Measure> conv = r.conversion_short ? r.conversion_short : r.conversion_all;
    out << r.concept_id << ',' << percent_cell(r.contact) << ',' << percent_cell(r.relative_contact)
        << ',' << percent_cell(r.conversion_short) << ',' << percent_cell(r.conversion_all) << ','
        << percent_cell(r.conversion_long) << ',' << r.contact.denominator << ','
        << r.relative_contact.denominator << ',' << (conv ? std::to_string(conv->denominator) : "")
        << '\n';
  }
  return out.str();
}

nlohmann::ordered_json EfficiencyTable::to_json() const {
  auto rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["concept"] = r.concept_id;
    j["contact"] = measure_json(r.contact);
    j["relative_contact"] = measure_json(r.relative_contact);
    j["conversion_short"] = measure_json(r.conversion_short);
    j["conversion_all"] = measure_json(r.conversion_all);
    j["conversion_long"] = measure_json(r.conversion_long);
    j["denominator_contact"] = r.contact.denominator;
    j["denominator_relative_contact"] = r.relative_contact.denominator;
    std::optional<Measure> conv = r.conversion_short ? r.conversion_short : r.conversion_all;
    j["denominator_conversion"] = conv ? nlohmann::ordered_json(conv->denominator) : nullptr;
    rows_json.push_back(std::move(j));
  }
  return rows_json;
}

std::string delta_csv(const EfficiencyTable& before, const EfficiencyTable& after) {
  std::ostringstream out;
  out << "concept,contact,relative_contact,conversion_short,conversion_all,conversion_long\n";
  for (const auto& a : after.rows) {
    auto it = std::find_if(before.rows.begin(), before.rows.end(),
                           [&](const EfficiencyRow& b) { return b.concept_id == a.concept_id; });
    out << a.concept_id;
    auto cell = [&](auto member) {
      out << ',';
      if (it == before.rows.end()) return;
      auto x = percent_value(std::optional<Measure>((*it).*member));
      auto y = percent_value(std::optional<Measure>(a.*member));
      if (x && y) out << signed_tenths(*y - *x);
    };
    cell(&EfficiencyRow::contact);
    cell(&EfficiencyRow::relative_contact);
    cell(&EfficiencyRow::conversion_short);
    cell(&EfficiencyRow::conversion_all);
    cell(&EfficiencyRow::conversion_long);
    out << '\n';
  }
  return out.str();
}

}  // namespace wum
