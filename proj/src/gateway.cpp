#include "wum/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"
#include "wum/efficiency.hpp"
#include "wum/mint.hpp"
#include "wum/postminer.hpp"
#include "wum/synthgen.hpp"

namespace wum {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* n) { return k == n; }) ==
        known.end()) {
      throw ConfigError(where + ": unknown key '" + k + "'");
    }
  }
}

Ratio ratio_value(const json& v, const std::string& where) {
  try {
    if (v.is_string()) return parse_decimal(v.get<std::string>());
    if (v.is_number()) return parse_decimal(v.dump());
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": expected a decimal number");
}

Millis seconds_value(const json& v, const std::string& where) {
  if (!v.is_number() || v.get<double>() < 0) throw ConfigError(where + ": expected seconds >= 0");
  return Millis(std::llround(v.get<double>() * 1000.0));
}

std::optional<Millis> optional_seconds(const json& v, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  return seconds_value(v, where);
}

Wildcard wildcard_value(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected \"[l;u]\"");
  auto text = v.get<std::string>();
  try {
    auto spec = parse_path_spec(text, Wildcard{}, std::nullopt);
    if (spec.bound && text.front() == '[') return *spec.bound;
  } catch (const Error&) {
  }
  throw ConfigError(where + ": expected \"[l;u]\", got \"" + text + "\"");
}

std::filesystem::path path_value(const json& v, const std::filesystem::path& base,
                                 const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a path");
  std::filesystem::path p = v.get<std::string>();
  return p.is_relative() && !base.empty() ? base / p : p;
}

void parse_session(const json& j, SessionConfig& s) {
  check_keys(j, "session",
             {"page_stay_limit_seconds", "total_duration_limit_seconds",
              "customer_dwell_threshold_seconds", "success_relabel", "final_dwell_counts", "dedup"});
  if (j.contains("page_stay_limit_seconds"))
    s.page_stay_limit = seconds_value(j["page_stay_limit_seconds"], "session.page_stay_limit_seconds");
  if (j.contains("total_duration_limit_seconds"))
    s.total_duration_limit =
        optional_seconds(j["total_duration_limit_seconds"], "session.total_duration_limit_seconds");
  if (j.contains("customer_dwell_threshold_seconds"))
    s.customer_dwell_threshold = optional_seconds(j["customer_dwell_threshold_seconds"],
                                                  "session.customer_dwell_threshold_seconds");
  if (j.contains("success_relabel")) {
    const auto& v = j["success_relabel"];
    if (v.is_null()) {
      s.success_relabel.reset();
    } else if (v.is_string()) {
      s.success_relabel = v.get<std::string>();
    } else {
      throw ConfigError("session.success_relabel: expected a concept id or null");
    }
  }
  if (j.contains("final_dwell_counts")) s.final_dwell_counts = j["final_dwell_counts"].get<bool>();
  if (j.contains("dedup")) {
    auto d = j["dedup"].get<std::string>();
    if (d == "url") {
      s.dedup = DedupMode::url;
    } else if (d == "concept") {
      s.dedup = DedupMode::concept_id;
    } else {
      throw ConfigError("session.dedup: expected \"url\" or \"concept\"");
    }
  }
}

void parse_cleaning(const json& j, CleaningConfig& c) {
  check_keys(j, "cleaning",
             {"ignore_extensions", "ignore_agent_patterns", "min_human_inter_request_seconds",
              "empty_referrer_heuristic_enabled", "empty_referrer_min_requests"});
  if (j.contains("ignore_extensions"))
    c.ignore_extensions = j["ignore_extensions"].get<std::vector<std::string>>();
  if (j.contains("ignore_agent_patterns"))
    c.ignore_agent_patterns = j["ignore_agent_patterns"].get<std::vector<std::string>>();
  if (j.contains("min_human_inter_request_seconds"))
    c.min_human_inter_request_seconds = j["min_human_inter_request_seconds"].get<double>();
  if (j.contains("empty_referrer_heuristic_enabled"))
    c.empty_referrer_heuristic_enabled = j["empty_referrer_heuristic_enabled"].get<bool>();
  if (j.contains("empty_referrer_min_requests"))
    c.empty_referrer_min_requests = j["empty_referrer_min_requests"].get<std::size_t>();
}

void parse_heuristics(const json& j, HeuristicConfig& h) {
  check_keys(j, "heuristics",
             {"low_contact_threshold", "low_conversion_threshold", "high_conversion_threshold",
              "frequent_pattern_min_support", "short_spec", "long_spec", "entry_spec",
              "postminer_thr", "contact_shift_delta", "divergence_delta",
              "merge_confidence_threshold", "exclude_default_concept", "target"});
  auto ratio = [&](const char* key, Ratio& r) {
    if (j.contains(key)) r = ratio_value(j[key], std::string("heuristics.") + key);
  };
  ratio("low_contact_threshold", h.low_contact_threshold);
  ratio("low_conversion_threshold", h.low_conversion_threshold);
  ratio("high_conversion_threshold", h.high_conversion_threshold);
  ratio("contact_shift_delta", h.contact_shift_delta);
  ratio("divergence_delta", h.divergence_delta);
  ratio("merge_confidence_threshold", h.merge_confidence_threshold);
  if (j.contains("frequent_pattern_min_support"))
    h.frequent_pattern_min_support = j["frequent_pattern_min_support"].get<std::uint64_t>();
  if (j.contains("short_spec")) h.short_spec = wildcard_value(j["short_spec"], "heuristics.short_spec");
  if (j.contains("entry_spec")) h.entry_spec = wildcard_value(j["entry_spec"], "heuristics.entry_spec");
  if (j.contains("long_spec")) {
    if (j["long_spec"].is_null()) {
      h.long_spec.reset();
    } else {
      h.long_spec = wildcard_value(j["long_spec"], "heuristics.long_spec");
    }
  }
  if (j.contains("postminer_thr")) {
    const auto& v = j["postminer_thr"];
    try {
      h.postminer_thr = PostMinerConfig::parse(v.is_string() ? v.get<std::string>() : v.dump());
    } catch (const Error& e) {
      throw ConfigError(std::string("heuristics.postminer_thr: ") + e.what());
    }
  }
  if (j.contains("exclude_default_concept"))
    h.exclude_default_concept = j["exclude_default_concept"].get<bool>();
  if (j.contains("target")) {
    if (j["target"].is_null()) {
      h.target.reset();
    } else {
      h.target = j["target"].get<std::string>();
    }
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

ojson measure_to_json(const Measure& m) {
  ojson j;
  j["num"] = m.numerator;
  j["den"] = m.denominator;
  j["value"] = ratio_to_json(m.value());
  return j;
}

std::string to_hex(std::string_view s) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

std::optional<std::string> from_hex(std::string_view s) {
  if (s.empty() || s.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    int hi = nibble(s[i]);
    int lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<char>(hi * 16 + lo));
  }
  return out;
}

std::optional<View> view_prefix(std::string_view text, std::string_view& rest) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  try {
    View v = parse_view(text.substr(0, colon));
    rest = text.substr(colon + 1);
    return v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

// A pattern reference that names no pattern of the data set.
class NotFound : public Error {
 public:
  using Error::Error;
};

ojson mine_value(const Dataset& ds, const mint::MintQuery& q, View view,
                 const EvaluateOptions& options) {
  auto results = evaluate_query(q, ds.index(view), options);
  auto j = results_to_json(q, results);
  j["view"] = std::string(to_string(view));
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& jr = j["results"][i];
    ojson with_id;
    with_id["id"] = pattern_id(view, results[i].pattern.gseq);
    for (auto& [k, v] : jr.items()) with_id[k] = v;
    jr = std::move(with_id);
  }
  j["warnings"] = validate_query(q, ds.hierarchy());
  return j;
}

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

void ProjectConfig::validate() const {
  session.validate();
  cleaning.validate();
  heuristics.validate();
  if (query_timeout_ms && *query_timeout_ms == 0) throw ConfigError("query_timeout_ms must be > 0");
}

ProjectConfig parse_project_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"logs", "log_format", "strict", "hierarchy", "store", "output_dir", "session",
              "cleaning", "heuristics", "query_timeout_ms"});
  ProjectConfig cfg;
  try {
    if (j.contains("logs")) {
      if (!j["logs"].is_array()) throw ConfigError("logs: expected an array of paths");
      for (const auto& p : j["logs"]) cfg.logs.push_back(path_value(p, base_dir, "logs[]"));
    }
    if (j.contains("log_format")) cfg.log_format = parse_log_format(j["log_format"].get<std::string>());
    if (j.contains("strict")) cfg.strict = j["strict"].get<bool>();
    if (j.contains("hierarchy")) cfg.hierarchy = path_value(j["hierarchy"], base_dir, "hierarchy");
    if (j.contains("store")) cfg.store = path_value(j["store"], base_dir, "store");
    if (j.contains("output_dir")) cfg.output_dir = path_value(j["output_dir"], base_dir, "output_dir");
    if (j.contains("session")) parse_session(j["session"], cfg.session);
    if (j.contains("cleaning")) parse_cleaning(j["cleaning"], cfg.cleaning);
    if (j.contains("heuristics")) parse_heuristics(j["heuristics"], cfg.heuristics);
    if (j.contains("query_timeout_ms") && !j["query_timeout_ms"].is_null())
      cfg.query_timeout_ms = j["query_timeout_ms"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ProjectConfig load_project_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_project_config(text, std::filesystem::absolute(path).parent_path());
}

PrepareResult prepare(const ProjectConfig& cfg, const ConceptHierarchy& h) {
  if (cfg.logs.empty()) throw ConfigError("no logs configured");
  PrepareResult res;
  std::vector<LogRecord> records;
  for (const auto& path : cfg.logs) {
    IngestReport one;
    try {
      auto part = read_log_file(path, cfg.log_format, cfg.strict, one);
      records.insert(records.end(), std::make_move_iterator(part.begin()),
                     std::make_move_iterator(part.end()));
    } catch (const LogParseError& e) {
      throw Error(path.string() + ":" + std::to_string(e.line()) + ": " + e.what());
    }
    res.ingest.lines += one.lines;
    res.ingest.parsed += one.parsed;
    res.ingest.parse_errors += one.parse_errors;
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const LogRecord& a, const LogRecord& b) { return a.timestamp < b.timestamp; });
  auto cleaned = clean_records(records, cfg.cleaning, res.cleaning);
  res.cleaning.parse_errors = res.ingest.parse_errors;
  auto log = sessionize(cleaned, h, cfg.session, &res.sessionize);
  if (!cfg.store.empty()) {
    if (cfg.store.has_parent_path()) std::filesystem::create_directories(cfg.store.parent_path());
    write_session_store_file(log, cfg.store.string());
  }
  res.partition = partition_log(log);
  return res;
}

std::string partition_counts_line(const Partition& p) {
  std::ostringstream ss;
  ss << "all=" << p.all.size() << " active=" << p.active.size() << " customer=" << p.customer.size()
     << " noncustomer=" << p.noncustomer.size() << " inactive=" << p.inactive.size();
  return ss.str();
}

Dataset::Dataset(ConceptHierarchy h, SessionLog log, HeuristicConfig heuristics)
    : h_(std::move(h)), partition_(partition_log(log)), heuristics_(std::move(heuristics)) {
  for (View v : {View::all, View::active, View::inactive, View::customer, View::noncustomer}) {
    auto seqs = partition_.view(v).sequences();
    indexes_.emplace(v, LogIndex(std::span<const Sequence>(seqs)));
  }
}

const LogIndex& Dataset::index(View v) const { return indexes_.at(v); }

std::string pattern_id(View v, const GSequence& g) { return to_hex(pattern_ref(v, g)); }

PatternRef resolve_pattern_ref(std::string_view text, View default_view) {
  std::string decoded;
  if (auto d = from_hex(text)) {
    decoded = *d;
    text = decoded;
  }
  PatternRef ref;
  ref.view = default_view;
  std::string_view rest = text;
  if (auto v = view_prefix(text, rest)) ref.view = *v;
  try {
    ref.gseq = parse_gsequence(rest);
  } catch (const Error& e) {
    throw NotFound("unknown pattern '" + std::string(text) + "': " + e.what());
  }
  if (ref.gseq.empty()) throw NotFound("unknown pattern '" + std::string(text) + "'");
  return ref;
}

ojson summary_json(const Dataset& ds) {
  const auto& p = ds.partition();
  const auto& h = ds.hierarchy();
  ojson j;
  j["counts"] = {{"all", p.all.size()},
                 {"active", p.active.size()},
                 {"inactive", p.inactive.size()},
                 {"customer", p.customer.size()},
                 {"noncustomer", p.noncustomer.size()}};
  j["action_pages"] = action_concepts(h, false);
  j["target_pages"] = target_concepts(h);
  j["default_concept"] = h.default_concept();
  ojson pages = ojson::array();
  for (const auto& page : ds.index(View::all).pages()) pages.push_back(to_string(page));
  j["pages"] = std::move(pages);
  return j;
}

std::string mine_json(const Dataset& ds, std::string_view query_text, View view,
                      const EvaluateOptions& options) {
  auto q = mint::parse_query(query_text);
  return dump(mine_value(ds, q, view, options));
}

ojson contact_measures_json(const Dataset& ds, View view) {
  const auto& h = ds.hierarchy();
  const auto& log = ds.partition().view(view);
  ojson j;
  j["view"] = std::string(to_string(view));
  j["sessions"] = log.size();
  j["rows"] = ojson::array();
  for (const auto& a : action_concepts(h, ds.heuristics().exclude_default_concept)) {
    ojson row;
    row["concept"] = a;
    row["contact"] = measure_to_json(contact_efficiency(a, log, h));
    row["relative_contact"] = measure_to_json(relative_contact_efficiency(a, log, h));
    j["rows"].push_back(std::move(row));
  }
  return j;
}

ojson conversion_measures_json(const Dataset& ds, const std::optional<ConceptId>& target,
                               std::string_view spec_text) {
  const auto& h = ds.hierarchy();
  const auto& cfg = ds.heuristics();
  auto spec = parse_path_spec(spec_text, cfg.short_spec, cfg.long_spec);
  std::vector<ConceptId> targets;
  if (target) {
    targets.push_back(*target);
  } else if (cfg.target) {
    targets.push_back(*cfg.target);
  } else {
    targets = target_concepts(h);
  }
  const auto& log = ds.partition().all;
  ojson j;
  j["spec"] = std::string(spec_text);
  j["rows"] = ojson::array();
  for (const auto& t : targets) {
    for (const auto& p : action_concepts(h, cfg.exclude_default_concept)) {
      ojson row;
      row["start"] = p;
      row["target"] = t;
      row["conversion"] = measure_to_json(conversion_efficiency(p, t, spec, log, h));
      j["rows"].push_back(std::move(row));
    }
  }
  return j;
}

ojson pattern_json(const Dataset& ds, const PatternRef& ref, const std::optional<PostMinerConfig>& thr) {
  auto pattern = build_pattern(ref.gseq, ds.index(ref.view));
  if (pattern.stats.empty() || pattern.stats.back().support == 0) {
    throw NotFound("pattern " + pattern_ref(ref.view, ref.gseq) + " has no match in the " +
                   std::string(to_string(ref.view)) + " log");
  }
  if (thr) {
    for (auto& t : pattern.trees) t = prune_and_merge(t, *thr);
  }
  ojson j;
  j["id"] = pattern_id(ref.view, ref.gseq);
  j["view"] = std::string(to_string(ref.view));
  if (thr) {
    if (auto* abs = std::get_if<std::uint64_t>(&thr->thr)) {
      j["thr"] = *abs;
    } else {
      j["thr"] = format_decimal(std::get<Ratio>(thr->thr));
    }
  }
  auto body = pattern_to_json(pattern);
  for (auto& [k, v] : body.items()) j[k] = v;
  return j;
}

ojson compare_json(const Dataset& ds, std::string_view query_text,
                   const std::optional<PostMinerConfig>& thr, const EvaluateOptions& options) {
  auto q = mint::parse_query(query_text);
  auto cfg = ds.heuristics();
  if (thr) cfg.postminer_thr = *thr;
  auto customer = evaluate_query(q, ds.index(View::customer), options);
  auto noncustomer = evaluate_query(q, ds.index(View::noncustomer), options);
  std::vector<GSequence> cg;
  std::vector<GSequence> ng;
  for (const auto& r : customer) cg.push_back(r.pattern.gseq);
  for (const auto& r : noncustomer) ng.push_back(r.pattern.gseq);
  auto pairs = comparable_patterns(cg, ng);

  ojson j;
  j["query"] = mint::print_query(q);
  j["pairs"] = ojson::array();
  for (const auto& pr : pairs) {
    ojson jp;
    jp["customer"] = pattern_id(View::customer, cg[pr.customer]);
    jp["noncustomer"] = pattern_id(View::noncustomer, ng[pr.noncustomer]);
    jp["customer_gsequence"] = to_string(cg[pr.customer]);
    jp["noncustomer_gsequence"] = to_string(ng[pr.noncustomer]);
    jp["mode"] = std::string(to_string(pr.mode));
    j["pairs"].push_back(std::move(jp));
  }

  // Every customer pattern is compared against the union of its partners.
  std::vector<Finding> findings;
  j["comparisons"] = ojson::array();
  for (std::size_t c = 0; c < cg.size(); ++c) {
    if (cg[c].size() < 2) continue;
    std::vector<GSequence> partners;
    for (const auto& pr : pairs) {
      if (pr.customer == c) partners.push_back(ng[pr.noncustomer]);
    }
    if (partners.empty()) continue;
    auto cp = compare_pattern(cg[c], partners, ds.index(View::customer), ds.index(View::noncustomer),
                              ds.hierarchy(), cfg, findings);
    ojson jc;
    jc["customer"] = to_string(cp.customer);
    jc["noncustomer"] = ojson::array();
    for (const auto& g : cp.noncustomer) jc["noncustomer"].push_back(to_string(g));
    jc["customer_tree"] = cp.customer_tree.to_json_value();
    jc["noncustomer_tree"] = cp.noncustomer_tree.to_json_value();
    j["comparisons"].push_back(std::move(jc));
  }
  sort_findings(findings);
  j["findings"] = findings_to_json(findings);
  return j;
}

std::string tree_to_dot(const AggregateTree& tree, std::string_view name) {
  std::ostringstream out;
  out << "digraph \"" << dot_escape(name) << "\" {\n";
  out << "  node [shape=box];\n";
  tree.visit([&](AggregateTree::NodeId id, const AggregateTree::Node& n, std::size_t) {
    std::string label = n.page ? n.page->concept_id + "," + std::to_string(n.page->occurrence)
                               : std::string("(log)");
    out << "  n" << id << " [label=\"" << dot_escape(label) << " (" << n.hits << ")\"";
    if (n.completed > 0) out << ", peripheries=2";
    out << "];\n";
  });
  tree.visit([&](AggregateTree::NodeId id, const AggregateTree::Node& n, std::size_t) {
    for (auto c : n.children) {
      out << "  n" << id << " -> n" << c;
      if (tree.node(c).merged) out << " [style=dashed]";
      out << ";\n";
    }
  });
  out << "}\n";
  return out.str();
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// HTTP service

Service::Service(std::shared_ptr<const Dataset> ds, std::optional<std::uint64_t> timeout_ms)
    : ds_(std::move(ds)), timeout_ms_(timeout_ms) {}

EvaluateOptions Service::options_for(const json& body) const {
  EvaluateOptions o;
  auto ms = timeout_ms_;
  if (body.is_object() && body.contains("timeout_ms")) ms = body["timeout_ms"].get<std::uint64_t>();
  if (ms) o.deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(*ms);
  return o;
}

namespace {

HttpResponse json_response(int status, const ojson& j) { return {status, dump(j)}; }

HttpResponse error_response(int status, const std::string& message) {
  ojson j;
  j["error"] = message;
  return json_response(status, j);
}

std::optional<std::string> param(const std::multimap<std::string, std::string>& params,
                                 const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  auto j = json::parse(body);
  if (!j.is_object()) throw Error("request body must be a JSON object");
  return j;
}

std::optional<PostMinerConfig> thr_from(const json& body) {
  if (!body.contains("thr") || body["thr"].is_null()) return std::nullopt;
  const auto& v = body["thr"];
  auto cfg = PostMinerConfig::parse(v.is_string() ? v.get<std::string>() : v.dump());
  cfg.validate();
  return cfg;
}

std::string string_field(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string())
    throw Error(std::string("missing string field '") + key + "'");
  return body[key].get<std::string>();
}

}  // namespace

HttpResponse Service::handle(std::string_view method, std::string_view path,
                             const std::multimap<std::string, std::string>& params,
                             std::string_view body) const {
  static const std::set<std::string, std::less<>> routes{
      "/api/summary", "/api/query", "/api/measures/contact", "/api/measures/conversion",
      "/api/postmine", "/api/compare"};
  constexpr std::string_view patterns_prefix = "/api/patterns/";
  bool is_pattern = path.substr(0, patterns_prefix.size()) == patterns_prefix;
  if (!routes.count(path) && !is_pattern) return error_response(404, "no such route");
  if (!ds_) return error_response(409, "no prepared session store; run `wum prepare` first");
  const Dataset& ds = *ds_;
  auto expect = [&](std::string_view m) { return method == m; };

  try {
    if (path == "/api/summary" && expect("GET")) return json_response(200, summary_json(ds));
    if (path == "/api/query" && expect("POST")) {
      auto b = parse_body(body);
      auto text = string_field(b, "mint");
      View view = b.contains("view") ? parse_view(b["view"].get<std::string>()) : View::all;
      return {200, mine_json(ds, text, view, options_for(b))};
    }
    if (path == "/api/measures/contact" && expect("GET")) {
      View view = parse_view(param(params, "view").value_or("all"));
      return json_response(200, contact_measures_json(ds, view));
    }
    if (path == "/api/measures/conversion" && expect("GET")) {
      return json_response(200, conversion_measures_json(ds, param(params, "target"),
                                                         param(params, "spec").value_or("short")));
    }
    if (path == "/api/postmine" && expect("POST")) {
      auto b = parse_body(body);
      auto ref = resolve_pattern_ref(string_field(b, "pattern"),
                                     b.contains("view") ? parse_view(b["view"].get<std::string>())
                                                        : View::all);
      auto thr = thr_from(b);
      return json_response(200, pattern_json(ds, ref, thr ? thr : ds.heuristics().postminer_thr));
    }
    if (path == "/api/compare" && expect("POST")) {
      auto b = parse_body(body);
      return json_response(200, compare_json(ds, string_field(b, "query"), thr_from(b), options_for(b)));
    }
    if (is_pattern && expect("GET")) {
      std::optional<PostMinerConfig> thr;
      if (auto t = param(params, "thr")) thr = PostMinerConfig::parse(*t);
      return json_response(
          200, pattern_json(ds, resolve_pattern_ref(path.substr(patterns_prefix.size())), thr));
    }
    return error_response(405, "method not allowed");
  } catch (const mint::SyntaxError& e) {
    ojson j;
    j["error"] = "syntax error";
    j["line"] = e.line();
    j["column"] = e.column();
    j["message"] = e.message();
    return json_response(400, j);
  } catch (const NotFound& e) {
    return error_response(404, e.what());
  } catch (const Cancelled& e) {
    return error_response(503, e.what());
  } catch (const json::exception& e) {
    return error_response(400, std::string("bad request: ") + e.what());
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
}

std::unique_ptr<httplib::Server> make_server(const Service& service) {
  auto server = std::make_unique<httplib::Server>();
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
    auto r = service.handle(req.method, req.path, params, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, "application/json");
  };
  server->Get(".*", route);
  server->Post(".*", route);
  server->Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
  return server;
}

// ---------------------------------------------------------------------------
// CLI

namespace {

struct CliContext {
  std::string config_path;
  std::string store;
  std::string hierarchy;
  std::ostream& out;
  std::ostream& err;

  ProjectConfig config() const {
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv("WUM_CONFIG")) path = env;
    }
    ProjectConfig cfg;
    if (!path.empty()) cfg = load_project_config(path);
    if (!store.empty()) cfg.store = store;
    if (!hierarchy.empty()) cfg.hierarchy = hierarchy;
    return cfg;
  }

  ConceptHierarchy load_h(const ProjectConfig& cfg) const {
    if (cfg.hierarchy.empty()) throw ConfigError("no hierarchy configured (--hierarchy or config)");
    return load_hierarchy_file(cfg.hierarchy.string());
  }

  std::shared_ptr<const Dataset> dataset(const ProjectConfig& cfg) const {
    if (cfg.store.empty()) throw ConfigError("no session store configured (--store or config)");
    if (!std::filesystem::exists(cfg.store))
      throw Error("session store " + cfg.store.string() + " does not exist; run `wum prepare` first");
    return std::make_shared<const Dataset>(load_h(cfg), read_session_store_file(cfg.store.string()),
                                           cfg.heuristics);
  }
};

std::string query_text(const std::string& arg) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(arg, ec)) return read_text_file(arg);
  return arg;
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Web usage mining toolkit", "wum"};
  app.require_subcommand(1);
  std::string config_path, store, hierarchy;
  app.add_option("--config", config_path, "Project config (JSON); defaults to $WUM_CONFIG");
  app.add_option("--store", store, "Session store (overrides the config)");
  app.add_option("--hierarchy", hierarchy, "Concept hierarchy (overrides the config)");

  auto* prep = app.add_subcommand("prepare", "Ingest, clean, sessionize, classify and store");

  auto* agg = app.add_subcommand("aggregate", "Build and store the Aggregated Log");
  std::string agg_view = "all", agg_out;
  agg->add_option("--view", agg_view, "all|active|inactive|customer|noncustomer");
  agg->add_option("--out", agg_out, "Output file (default: <output_dir>/aggregated-<view>.json)");

  auto* mine = app.add_subcommand("mine", "Evaluate a MINT query");
  std::string mine_q, mine_view = "all";
  mine->add_option("-q,--query", mine_q, "Query text or file")->required();
  mine->add_option("--view", mine_view, "all|active|inactive|customer|noncustomer");

  auto* measure = app.add_subcommand("measure", "Contact or conversion efficiency");
  measure->require_subcommand(1);
  auto* m_contact = measure->add_subcommand("contact", "Contact and relative contact efficiency");
  std::string mc_view = "all";
  m_contact->add_option("--view", mc_view, "View the measures are computed on");
  auto* m_conv = measure->add_subcommand("conversion", "Conversion efficiency of action pages");
  std::string mv_target, mv_spec = "short";
  m_conv->add_option("--target", mv_target, "Target concept (default: all target pages)");
  m_conv->add_option("--spec", mv_spec, "all|short|long|[l;u]");

  auto* report = app.add_subcommand("report", "Run an analysis workflow");
  std::string r_kind, r_format = "md", r_thr;
  report->add_option("kind", r_kind, "contact|conversion|compare")
      ->required()
      ->check(CLI::IsMember({"contact", "conversion", "compare"}));
  report->add_option("--format", r_format, "md|json")->check(CLI::IsMember({"md", "json"}));
  report->add_option("--thr", r_thr, "Post-miner threshold (hits, or fraction with a '.')");

  auto* exp = app.add_subcommand("export", "Export a navigation pattern tree");
  std::string e_format = "dot", e_ref, e_view = "all", e_thr;
  std::size_t e_tree = 0;
  exp->add_option("--format", e_format, "dot|json")->check(CLI::IsMember({"dot", "json"}));
  exp->add_option("pattern", e_ref, "Pattern id, <view>:<g-sequence> or g-sequence")->required();
  exp->add_option("--view", e_view, "View for a bare g-sequence");
  exp->add_option("--thr", e_thr, "Prune with the post-miner first");
  exp->add_option("--tree", e_tree, "Index of the tree to export as DOT");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over the prepared store");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "Port");
  serve->add_option("--host", host, "Address to bind");

  auto* gen = app.add_subcommand("generate", "Write a synthetic scenario store");
  std::string g_scenario, g_out;
  std::optional<std::uint64_t> g_sessions, g_seed;
  gen->add_option("--scenario", g_scenario, "Scenario JSON")->required();
  gen->add_option("--out", g_out, "Output directory")->required();
  gen->add_option("--sessions", g_sessions, "Override the session count");
  gen->add_option("--seed", g_seed, "Override the seed");

  for (int i = 1; i < argc; ++i) {
    std::string_view a = argv[i];
    if (a.empty() || a.front() == '-') {
      if (a.find('=') == std::string_view::npos && a != "-h" && a != "--help") ++i;
      continue;
    }
    if (!app.get_subcommand_no_throw(std::string(a))) {
      err << "wum: unknown subcommand '" << a << "'\nrun `wum --help` for usage\n";
      return 2;
    }
    break;
  }
  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "wum: " << e.what() << "\n";
    if (e.get_exit_code() == 0) return 0;
    err << "run `wum --help` for usage\n";
    return 2;
  }

  CliContext ctx{config_path, store, hierarchy, out, err};
  try {
    if (prep->parsed()) {
      auto cfg = ctx.config();
      auto h = ctx.load_h(cfg);
      if (cfg.store.empty()) throw ConfigError("no session store configured (--store or config)");
      auto res = prepare(cfg, h);
      for (const auto& d : res.sessionize.diagnostics) err << "warning: " << d << "\n";
      err << "cleaning: " << res.cleaning.to_json() << "\n";
      out << partition_counts_line(res.partition) << "\n";
      return 0;
    }
    if (agg->parsed()) {
      auto cfg = ctx.config();
      auto ds = ctx.dataset(cfg);
      auto text = ds->index(parse_view(agg_view)).tree().to_json(2) + "\n";
      std::filesystem::path target = agg_out;
      if (target.empty() && !cfg.output_dir.empty())
        target = cfg.output_dir / ("aggregated-" + agg_view + ".json");
      if (target.empty()) {
        out << text;
      } else {
        write_text_file(target, text);
        out << target.string() << "\n";
      }
      return 0;
    }
    if (mine->parsed()) {
      auto cfg = ctx.config();
      auto ds = ctx.dataset(cfg);
      auto text = query_text(mine_q);
      for (const auto& w : mint::validate_query(mint::parse_query(text), ds->hierarchy()))
        err << "warning: " << w << "\n";
      EvaluateOptions opts;
      if (cfg.query_timeout_ms)
        opts.deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(*cfg.query_timeout_ms);
      out << mine_json(*ds, text, parse_view(mine_view), opts);
      return 0;
    }
    if (measure->parsed()) {
      auto cfg = ctx.config();
      auto ds = ctx.dataset(cfg);
      if (m_contact->parsed()) {
        out << dump(contact_measures_json(*ds, parse_view(mc_view)));
      } else {
        std::optional<ConceptId> t;
        if (!mv_target.empty()) t = mv_target;
        out << dump(conversion_measures_json(*ds, t, mv_spec));
      }
      return 0;
    }
    if (report->parsed()) {
      auto cfg = ctx.config();
      auto ds = ctx.dataset(cfg);
      auto heur = cfg.heuristics;
      if (!r_thr.empty()) heur.postminer_thr = PostMinerConfig::parse(r_thr);
      heur.validate();
      const auto& p = ds->partition();
      const auto& h = ds->hierarchy();
      auto emit = [&](const auto& rep) {
        out << (r_format == "json" ? dump(rep.to_json()) : rep.to_markdown());
      };
      if (r_kind == "contact") {
        emit(eval_contact(p, h, heur));
      } else if (r_kind == "conversion") {
        emit(eval_conversion(p, h, heur));
      } else {
        emit(eval_comparison(p.customer, p.noncustomer, h, heur));
      }
      return 0;
    }
    if (exp->parsed()) {
      auto cfg = ctx.config();
      auto ds = ctx.dataset(cfg);
      auto ref = resolve_pattern_ref(e_ref, parse_view(e_view));
      std::optional<PostMinerConfig> thr;
      if (!e_thr.empty()) {
        thr = PostMinerConfig::parse(e_thr);
        thr->validate();
      }
      if (e_format == "json") {
        out << dump(pattern_json(*ds, ref, thr));
        return 0;
      }
      auto pattern = build_pattern(ref.gseq, ds->index(ref.view));
      if (pattern.stats.back().support == 0)
        throw Error("pattern " + pattern_ref(ref.view, ref.gseq) + " has no match");
      if (e_tree >= pattern.trees.size())
        throw Error("tree index " + std::to_string(e_tree) + " out of range (pattern has " +
                    std::to_string(pattern.trees.size()) + " trees)");
      auto tree = pattern.trees[e_tree];
      if (thr) tree = prune_and_merge(tree, *thr);
      out << tree_to_dot(tree, to_string(ref.gseq));
      return 0;
    }
    if (serve->parsed()) {
      auto cfg = ctx.config();
      std::shared_ptr<const Dataset> ds;
      if (!cfg.store.empty() && std::filesystem::exists(cfg.store)) {
        ds = ctx.dataset(cfg);
      } else {
        err << "warning: no session store; API routes will answer 409\n";
      }
      Service service(ds, cfg.query_timeout_ms);
      auto server = make_server(service);
      out << "listening on http://" << host << ":" << port << "\n" << std::flush;
      if (!server->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
    if (gen->parsed()) {
      auto spec = load_scenario_file(g_scenario);
      if (g_sessions) spec.sessions = *g_sessions;
      if (g_seed) spec.seed = *g_seed;
      spec.validate();
      auto scenario = generate(spec);
      std::filesystem::path dir = g_out;
      std::filesystem::create_directories(dir);
      write_session_store_file(scenario.log, (dir / "sessions.ndjson").string());
      write_text_file(dir / "hierarchy.json", scenario_hierarchy(spec).to_json() + "\n");
      write_text_file(dir / "truth.json", dump(scenario.truth.to_json()));
      out << partition_counts_line(partition_log(scenario.log)) << "\n";
      return 0;
    }
  } catch (const mint::SyntaxError& e) {
    err << "wum: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "wum: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace wum
