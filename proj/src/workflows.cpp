#include "wum/workflows.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

namespace wum {

void HeuristicConfig::validate() const {
  auto open_unit = [](const Ratio& r, const char* name) {
    if (r.num == 0 || r >= Ratio{1, 1}) throw Error(std::string(name) + " must lie in (0,1)");
  };
  open_unit(low_contact_threshold, "low_contact_threshold");
  open_unit(low_conversion_threshold, "low_conversion_threshold");
  open_unit(high_conversion_threshold, "high_conversion_threshold");
  open_unit(contact_shift_delta, "contact_shift_delta");
  open_unit(divergence_delta, "divergence_delta");
  open_unit(merge_confidence_threshold, "merge_confidence_threshold");
  if (frequent_pattern_min_support == 0) throw Error("frequent_pattern_min_support must be positive");
  for (const auto* w : {&short_spec, &entry_spec}) {
    if (w->lower > w->upper) throw Error("path spec lower bound exceeds upper bound");
  }
  if (long_spec && long_spec->lower > long_spec->upper) {
    throw Error("long_spec lower bound exceeds upper bound");
  }
  postminer_thr.validate();
}

std::string_view to_string(FindingKind k) {
  switch (k) {
    case FindingKind::contact_shift: return "contact_shift";
    case FindingKind::divergent_pattern: return "divergent_pattern";
    case FindingKind::inefficient_in_between_page: return "inefficient_in_between_page";
    case FindingKind::low_conversion_inner_page: return "low_conversion_inner_page";
    case FindingKind::low_conversion_start_page: return "low_conversion_start_page";
  }
  return "contact_shift";
}

std::string_view to_string(Comparability c) {
  return c == Comparability::same_prefix ? "same_prefix" : "equal_but_last";
}

std::string pattern_ref(View v, const GSequence& g) {
  return std::string(to_string(v)) + ":" + to_string(g);
}

void sort_findings(std::vector<Finding>& findings) {
  std::stable_sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.concept_id < b.concept_id;
  });
}

namespace {

nlohmann::ordered_json measure_json(const Measure& m) {
  nlohmann::ordered_json j;
  j["num"] = m.numerator;
  j["den"] = m.denominator;
  j["value"] = ratio_to_json(m.value());
  return j;
}

std::string percent_or_dash(const std::optional<Ratio>& r) {
  return r ? format_percent(*r) + "%" : "n/a";
}

std::string percent_or_dash(const Measure& m) { return percent_or_dash(m.value()); }

std::vector<ConceptId> targets_of(const ConceptHierarchy& h, const HeuristicConfig& cfg) {
  if (cfg.target) return {*cfg.target};
  return target_concepts(h);
}

GSequence two_step(const PageOccurrence& a, const Wildcard& w, const PageOccurrence& b,
                   bool anchored = false) {
  GSequence g;
  g.anchored = anchored;
  g.elements = {a, b};
  g.wildcards = {w};
  return g;
}

void subtree_completed(const AggregateTree& t, AggregateTree::NodeId id, std::uint64_t& sum) {
  sum += t.node(id).completed;
  for (auto c : t.node(id).children) subtree_completed(t, c, sum);
}

/// Pages of the non-root, non-completing nodes of a pruned tree, in tree order.
std::vector<PageOccurrence> inner_pages(const AggregateTree& pruned, const PageOccurrence& end) {
  std::vector<PageOccurrence> out;
  pruned.visit([&](AggregateTree::NodeId, const AggregateTree::Node& n, std::size_t depth) {
    if (depth == 0 || !n.page || *n.page == end) return;
    if (std::find(out.begin(), out.end(), *n.page) == out.end()) out.push_back(*n.page);
  });
  return out;
}

std::vector<PageOccurrence> path_to(const AggregateTree& t, const PageOccurrence& page) {
  std::vector<PageOccurrence> path;
  std::vector<PageOccurrence> found;
  auto walk = [&](auto&& self, AggregateTree::NodeId id) -> bool {
    const auto& n = t.node(id);
    if (n.page) path.push_back(*n.page);
    if (id != AggregateTree::root_id && n.page == page) {
      found = path;
      return true;
    }
    for (auto c : n.children) {
      if (self(self, c)) return true;
    }
    if (n.page) path.pop_back();
    return false;
  };
  walk(walk, AggregateTree::root_id);
  return found;
}

}  // namespace

Onward onward(const AggregateTree& pattern_tree, const PageOccurrence& page) {
  Onward o;
  pattern_tree.visit([&](AggregateTree::NodeId id, const AggregateTree::Node& n, std::size_t depth) {
    if (depth == 0 || n.page != page) return;
    o.through += n.hits;
    subtree_completed(pattern_tree, id, o.completing);
  });
  return o;
}

nlohmann::ordered_json findings_to_json(const std::vector<Finding>& findings) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& f : findings) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(f.kind);
    j["concept"] = f.concept_id;
    nlohmann::ordered_json ev;
    ev["pattern_refs"] = f.evidence.pattern_refs;
    ev["ratios"] = nlohmann::ordered_json::object();
    for (const auto& [k, r] : f.evidence.ratios) ev["ratios"][k] = ratio_to_json(r);
    ev["counts"] = nlohmann::ordered_json::object();
    for (const auto& [k, c] : f.evidence.counts) ev["counts"][k] = c;
    ev["path"] = nlohmann::ordered_json::array();
    for (const auto& p : f.evidence.path) ev["path"].push_back(to_string(p));
    j["evidence"] = std::move(ev);
    j["narrative"] = f.narrative;
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

std::string findings_markdown(const std::vector<Finding>& findings) {
  std::ostringstream out;
  out << "## Findings\n\n";
  if (findings.empty()) out << "None.\n";
  for (const auto& f : findings) {
    out << "- **" << to_string(f.kind) << "** `" << f.concept_id << "`: " << f.narrative << "\n";
  }
  return out.str();
}

}  // namespace

ContactReport eval_contact(const Partition& p, const ConceptHierarchy& h, const HeuristicConfig& cfg) {
  cfg.validate();
  ContactReport report;
  auto sequences = p.all.sequences();
  LogIndex index{std::span<const Sequence>(sequences)};

  // Site entry pages: first page occurrences of the sessions, most frequent first.
  std::vector<std::pair<std::uint64_t, PageOccurrence>> entries;
  for (auto c : index.tree().root().children) {
    const auto& n = index.tree().node(c);
    if (n.hits >= cfg.frequent_pattern_min_support) entries.emplace_back(n.hits, *n.page);
  }

  for (const auto& a : action_concepts(h, cfg.exclude_default_concept)) {
    ContactReport::Row row{a, contact_efficiency(a, p.all, h), relative_contact_efficiency(a, p.all, h)};
    report.rows.push_back(row);
    auto contact = row.contact.value();
    if (row.contact.numerator == 0 || !contact || *contact >= cfg.low_contact_threshold) continue;

    const PageOccurrence action{a, 1};
    std::set<ConceptId> reported;
    for (const auto& [support, entry] : entries) {
      if (entry == action) continue;
      auto g = two_step(entry, cfg.entry_spec, action, true);
      auto pattern = build_pattern(g, index);
      const auto& tree = pattern.trees.front();
      auto pruned = prune_and_merge(tree, cfg.postminer_thr);
      for (const auto& page : inner_pages(pruned, action)) {
        auto o = onward(tree, page);
        auto rate = make_ratio(o.completing, o.through);
        if (!rate || *rate >= cfg.low_conversion_threshold) continue;
        if (!reported.insert(page.concept_id).second) continue;
        Finding f;
        f.kind = FindingKind::inefficient_in_between_page;
        f.concept_id = page.concept_id;
        f.evidence.pattern_refs.push_back(pattern_ref(View::all, g));
        f.evidence.ratios["contact"] = *contact;
        f.evidence.ratios["onward"] = *rate;
        f.evidence.counts["entry_sessions"] = support;
        f.evidence.counts["through"] = o.through;
        f.evidence.counts["continuing"] = o.completing;
        f.evidence.path = path_to(tree, page);
        f.narrative = "Reached by " + std::to_string(o.through) + " of " + std::to_string(support) +
                      " sessions entering at " + to_string(entry) + ", but only " +
                      std::to_string(o.completing) + " (" + percent_or_dash(rate) +
                      ") continue to action page " + a + " (contact " + percent_or_dash(contact) + ").";
        report.findings.push_back(std::move(f));
      }
    }
  }
  sort_findings(report.findings);
  return report;
}

nlohmann::ordered_json ContactReport::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json jr;
    jr["concept"] = r.concept_id;
    jr["contact"] = measure_json(r.contact);
    jr["relative_contact"] = measure_json(r.relative_contact);
    j["rows"].push_back(std::move(jr));
  }
  j["findings"] = findings_to_json(findings);
  return j;
}

std::string ContactReport::to_markdown() const {
  std::ostringstream out;
  out << "# Contact efficiency\n\n| Action page | Contact | Relative contact |\n|---|---:|---:|\n";
  for (const auto& r : rows) {
    out << "| " << r.concept_id << " | " << percent_or_dash(r.contact) << " | "
        << percent_or_dash(r.relative_contact) << " |\n";
  }
  out << "\n" << findings_markdown(findings);
  return out.str();
}

ConversionReport eval_conversion(const Partition& p, const ConceptHierarchy& h,
                                 const HeuristicConfig& cfg) {
  cfg.validate();
  ConversionReport report;
  auto active = p.active.sequences();
  LogIndex index{std::span<const Sequence>(active)};

  std::vector<std::pair<std::string, Wildcard>> specs{{"short", cfg.short_spec},
                                                      {"all", PathSpec::all().resolve(active)}};
  if (cfg.long_spec) specs.emplace_back("long", *cfg.long_spec);

  std::map<std::tuple<FindingKind, ConceptId, ConceptId>, std::size_t> seen;
  auto record = [&](Finding f, const ConceptId& start) {
    auto key = std::make_tuple(f.kind, f.concept_id, start);
    auto it = seen.find(key);
    if (it != seen.end()) {
      auto& refs = report.findings[it->second].evidence.pattern_refs;
      for (auto& r : f.evidence.pattern_refs) refs.push_back(std::move(r));
      return;
    }
    seen.emplace(key, report.findings.size());
    report.findings.push_back(std::move(f));
  };

  for (const auto& t : targets_of(h, cfg)) {
    if (h.role_of(t) != Role::target) throw Error("concept '" + t + "' is not a target page");
    const PageOccurrence target{t, 1};
    for (const auto& start : action_concepts(h, cfg.exclude_default_concept)) {
      for (const auto& [name, w] : specs) {
        auto m = conversion_efficiency(start, t, w, active);
        report.rows.push_back({start, t, name, m});
        auto conv = m.value();
        if (m.denominator < cfg.frequent_pattern_min_support || !conv ||
            *conv >= cfg.low_conversion_threshold) {
          continue;
        }
        auto g = two_step({start, 1}, w, target);
        auto pattern = build_pattern(g, index);
        const auto& tree = pattern.trees.front();
        auto pruned = prune_and_merge(tree, cfg.postminer_thr);
        bool inner_found = false;
        for (const auto& page : inner_pages(pruned, target)) {
          auto o = onward(tree, page);
          auto rate = make_ratio(o.completing, o.through);
          if (!rate || *rate >= cfg.low_conversion_threshold) continue;
          inner_found = true;
          Finding f;
          f.kind = FindingKind::low_conversion_inner_page;
          f.concept_id = page.concept_id;
          f.evidence.pattern_refs.push_back(pattern_ref(View::active, g));
          f.evidence.ratios["conversion"] = *conv;
          f.evidence.ratios["onward"] = *rate;
          f.evidence.counts["start_sessions"] = m.denominator;
          f.evidence.counts["through"] = o.through;
          f.evidence.counts["converted"] = o.completing;
          f.evidence.path = path_to(tree, page);
          f.narrative = "Inside the pattern of start page " + start + " (conversion " +
                        percent_or_dash(conv) + " towards " + t + ", " + name + " paths), " +
                        std::to_string(o.through) + " sessions pass through " + to_string(page) +
                        " and " + std::to_string(o.completing) + " of them reach the target.";
          record(std::move(f), start);
        }
        if (!inner_found) {
          Finding f;
          f.kind = FindingKind::low_conversion_start_page;
          f.concept_id = start;
          f.evidence.pattern_refs.push_back(pattern_ref(View::active, g));
          f.evidence.ratios["conversion"] = *conv;
          f.evidence.counts["start_sessions"] = m.denominator;
          f.evidence.counts["converted"] = m.numerator;
          f.evidence.path = {PageOccurrence{start, 1}};
          f.narrative = "Start page " + start + " is frequent (" + std::to_string(m.denominator) +
                        " active sessions) but converts only " + percent_or_dash(conv) +
                        " towards " + t + " over " + name +
                        " paths, and no frequent page inside its pattern explains the loss.";
          record(std::move(f), start);
        }
      }
    }
  }
  sort_findings(report.findings);
  return report;
}

nlohmann::ordered_json ConversionReport::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json jr;
    jr["start"] = r.start;
    jr["target"] = r.target;
    jr["spec"] = r.spec;
    jr["conversion"] = measure_json(r.conversion);
    j["rows"].push_back(std::move(jr));
  }
  j["findings"] = findings_to_json(findings);
  return j;
}

std::string ConversionReport::to_markdown() const {
  std::ostringstream out;
  out << "# Conversion efficiency\n\n| Start page | Target | Paths | Conversion | Sessions |\n"
         "|---|---|---|---:|---:|\n";
  for (const auto& r : rows) {
    out << "| " << r.start << " | " << r.target << " | " << r.spec << " | "
        << percent_or_dash(r.conversion) << " | " << r.conversion.denominator << " |\n";
  }
  out << "\n" << findings_markdown(findings);
  return out.str();
}

std::vector<ComparablePair> comparable_patterns(std::span<const GSequence> customer,
                                                std::span<const GSequence> noncustomer) {
  std::vector<ComparablePair> out;
  for (std::size_t i = 0; i < customer.size(); ++i) {
    for (std::size_t j = 0; j < noncustomer.size(); ++j) {
      const auto& c = customer[i];
      const auto& n = noncustomer[j];
      if (c.empty() || n.empty() || c.elements.front() != n.elements.front()) continue;
      bool equal_but_last = c.size() == n.size() && c.size() >= 2 && c.anchored == n.anchored &&
                            c.wildcards == n.wildcards && c.elements.back() != n.elements.back() &&
                            std::equal(c.elements.begin(), c.elements.end() - 1, n.elements.begin());
      out.push_back({i, j, equal_but_last ? Comparability::equal_but_last : Comparability::same_prefix});
    }
  }
  return out;
}

namespace {

Ratio share(std::uint64_t hits, std::uint64_t root) { return Ratio{hits, root}; }

struct DivergenceWalk {
  const AggregateTree& c;
  const AggregateTree& n;
  const ConceptHierarchy& h;
  const HeuristicConfig& cfg;
  std::vector<std::string> refs;
  std::vector<Finding>& out;
  std::vector<PageOccurrence> path;

  void report(const PageOccurrence& page, std::uint64_t ch, std::uint64_t nh, const char* what) {
    Finding f;
    f.kind = FindingKind::divergent_pattern;
    f.concept_id = page.concept_id;
    f.evidence.pattern_refs = refs;
    auto fc = share(ch, c.root().hits);
    auto fn = share(nh, n.root().hits);
    f.evidence.ratios["customer_share"] = fc;
    f.evidence.ratios["noncustomer_share"] = fn;
    f.evidence.counts["customer_hits"] = ch;
    f.evidence.counts["noncustomer_hits"] = nh;
    f.evidence.counts["customer_root"] = c.root().hits;
    f.evidence.counts["noncustomer_root"] = n.root().hits;
    f.evidence.path = path;
    f.evidence.path.push_back(page);
    f.narrative = std::string(what) + ": " + to_string(page) + " follows the path in " +
                  format_percent(fc) + "% of customer sessions and " + format_percent(fn) +
                  "% of non-customer sessions.";
    out.push_back(std::move(f));
  }

  void walk(AggregateTree::NodeId ci, AggregateTree::NodeId ni) {
    std::map<PageOccurrence, std::pair<std::optional<AggregateTree::NodeId>, std::optional<AggregateTree::NodeId>>> kids;
    for (auto k : c.node(ci).children) kids[*c.node(k).page].first = k;
    for (auto k : n.node(ni).children) kids[*n.node(k).page].second = k;
    for (const auto& [page, ids] : kids) {
      if (h.contains(page.concept_id) && h.role_of(page.concept_id) == Role::target) continue;
      auto [a, b] = ids;
      if (a && b) {
        auto ch = c.node(*a).hits;
        auto nh = n.node(*b).hits;
        if (abs_diff(share(ch, c.root().hits), share(nh, n.root().hits)) > cfg.divergence_delta) {
          report(page, ch, nh, "Shares differ");
        }
        path.push_back(page);
        walk(*a, *b);
        path.pop_back();
      } else if (a) {
        report(page, c.node(*a).hits, 0, "Only in the customer pattern");
      } else {
        report(page, 0, n.node(*b).hits, "Only in the non-customer pattern");
      }
    }
  }
};

}  // namespace

ComparedPattern compare_pattern(const GSequence& customer, std::vector<GSequence> noncustomer,
                                const LogIndex& customer_index, const LogIndex& noncustomer_index,
                                const ConceptHierarchy& h, const HeuristicConfig& cfg,
                                std::vector<Finding>& findings) {
  if (customer.size() < 2) throw Error("comparison needs a customer pattern with two elements");
  ComparedPattern cp;
  cp.customer = customer;
  cp.noncustomer = std::move(noncustomer);
  const auto& start = customer.elements.front();
  const auto& gap = customer.wildcards.back();
  std::vector<PageOccurrence> cend{customer.elements.back()};
  std::vector<PageOccurrence> nend;
  for (const auto& g : cp.noncustomer) nend.push_back(g.elements.back());
  cp.customer_tree = prune_and_merge(
      build_merged_tree(start, customer.anchored, gap, cend, customer_index, false), cfg.postminer_thr);
  cp.noncustomer_tree = prune_and_merge(
      build_merged_tree(start, customer.anchored, gap, nend, noncustomer_index, false),
      cfg.postminer_thr);
  if (cp.customer_tree.root().hits > 0 && cp.noncustomer_tree.root().hits > 0) {
    DivergenceWalk w{cp.customer_tree, cp.noncustomer_tree, h, cfg, {}, findings, {start}};
    w.refs.push_back(pattern_ref(View::customer, cp.customer));
    for (const auto& g : cp.noncustomer) w.refs.push_back(pattern_ref(View::noncustomer, g));
    w.walk(AggregateTree::root_id, AggregateTree::root_id);
  }
  return cp;
}

ComparisonReport eval_comparison(const SessionLog& customer, const SessionLog& noncustomer,
                                 const ConceptHierarchy& h, const HeuristicConfig& cfg) {
  cfg.validate();
  ComparisonReport report;
  auto actions = action_concepts(h, cfg.exclude_default_concept);

  for (const auto& a : actions) {
    ComparisonReport::Row row{a, relative_contact_efficiency(a, customer, h),
                              relative_contact_efficiency(a, noncustomer, h)};
    report.rows.push_back(row);
    auto rc = row.customer.value();
    auto rn = row.noncustomer.value();
    if (rc && rn && abs_diff(*rc, *rn) > cfg.contact_shift_delta) {
      Finding f;
      f.kind = FindingKind::contact_shift;
      f.concept_id = a;
      f.evidence.ratios["customer"] = *rc;
      f.evidence.ratios["noncustomer"] = *rn;
      f.evidence.ratios["delta"] = abs_diff(*rc, *rn);
      f.evidence.counts["customer_sessions"] = row.customer.numerator;
      f.evidence.counts["customer_total"] = row.customer.denominator;
      f.evidence.counts["noncustomer_sessions"] = row.noncustomer.numerator;
      f.evidence.counts["noncustomer_total"] = row.noncustomer.denominator;
      f.narrative = "Relative contact of " + a + " is " + format_percent(*rc) +
                    "% among customers and " + format_percent(*rn) + "% among non-customers.";
      report.findings.push_back(std::move(f));
    }
  }

  auto cseq = customer.sequences();
  auto nseq = noncustomer.sequences();
  LogIndex cidx{std::span<const Sequence>(cseq)};
  LogIndex nidx{std::span<const Sequence>(nseq)};

  for (const auto& t : targets_of(h, cfg)) {
    const PageOccurrence target{t, 1};
    for (const auto& a : actions) {
      const PageOccurrence start{a, 1};
      auto conv = conversion_efficiency(a, t, cfg.short_spec, cseq);
      auto value = conv.value();
      if (conv.denominator < cfg.frequent_pattern_min_support || !value ||
          *value < cfg.high_conversion_threshold) {
        continue;
      }
      auto customer_g = two_step(start, cfg.short_spec, target);

      mint::MintQuery q;
      q.selected = q.alias = "t";
      q.variables = {"x", "y"};
      q.templ.variables = q.variables;
      q.templ.wildcards = {cfg.short_spec};
      q.constraints = {mint::UrlConstraint{"x", mint::UrlOp::equals, a},
                       mint::OccurrenceConstraint{"x", 1},
                       mint::RatioConstraint{"y", "x", mint::Cmp::ge, cfg.merge_confidence_threshold}};
      std::vector<GSequence> found;
      for (auto& r : evaluate_query(q, nidx)) found.push_back(std::move(r.pattern.gseq));
      std::vector<GSequence> mine{customer_g};
      std::vector<GSequence> comparable;
      for (const auto& pair : comparable_patterns(mine, found)) {
        if (pair.mode == Comparability::equal_but_last) comparable.push_back(found[pair.noncustomer]);
      }
      auto cp = compare_pattern(customer_g, std::move(comparable), cidx, nidx, h, cfg, report.findings);
      cp.customer_conversion = conv;
      report.patterns.push_back(std::move(cp));
    }
  }
  sort_findings(report.findings);
  return report;
}

nlohmann::ordered_json ComparisonReport::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json jr;
    jr["concept"] = r.concept_id;
    jr["customer"] = measure_json(r.customer);
    jr["noncustomer"] = measure_json(r.noncustomer);
    j["rows"].push_back(std::move(jr));
  }
  j["patterns"] = nlohmann::ordered_json::array();
  for (const auto& p : patterns) {
    nlohmann::ordered_json jp;
    jp["customer"] = to_string(p.customer);
    jp["customer_conversion"] = measure_json(p.customer_conversion);
    jp["noncustomer"] = nlohmann::ordered_json::array();
    for (const auto& g : p.noncustomer) jp["noncustomer"].push_back(to_string(g));
    jp["customer_tree"] = p.customer_tree.to_json_value();
    jp["noncustomer_tree"] = p.noncustomer_tree.to_json_value();
    j["patterns"].push_back(std::move(jp));
  }
  j["findings"] = findings_to_json(findings);
  return j;
}

std::string ComparisonReport::to_markdown() const {
  std::ostringstream out;
  out << "# Customer vs. non-customer comparison\n\n"
         "| Action page | Relative contact (customers) | Relative contact (non-customers) |\n"
         "|---|---:|---:|\n";
  for (const auto& r : rows) {
    out << "| " << r.concept_id << " | " << percent_or_dash(r.customer) << " | "
        << percent_or_dash(r.noncustomer) << " |\n";
  }
  out << "\n## Compared patterns\n\n";
  if (patterns.empty()) out << "None.\n";
  for (const auto& p : patterns) {
    out << "- " << to_string(p.customer) << " (conversion " << percent_or_dash(p.customer_conversion)
        << ") against " << p.noncustomer.size() << " merged non-customer pattern(s)\n";
  }
  out << "\n" << findings_markdown(findings);
  return out.str();
}

}  // namespace wum
