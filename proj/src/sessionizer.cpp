#include "wum/sessionizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>
#include <unordered_map>

#include "json.hpp"

namespace wum {

std::string_view to_string(ActivityClass c) {
  switch (c) {
    case ActivityClass::inactive: return "inactive";
    case ActivityClass::noncustomer: return "noncustomer";
    case ActivityClass::customer: return "customer";
  }
  return "inactive";
}

ActivityClass parse_activity_class(std::string_view s) {
  if (s == "inactive") return ActivityClass::inactive;
  if (s == "noncustomer") return ActivityClass::noncustomer;
  if (s == "customer") return ActivityClass::customer;
  throw Error("unknown session label: " + std::string(s));
}

std::string_view to_string(View v) {
  switch (v) {
    case View::all: return "all";
    case View::active: return "active";
    case View::inactive: return "inactive";
    case View::customer: return "customer";
    case View::noncustomer: return "noncustomer";
  }
  return "all";
}

View parse_view(std::string_view s) {
  if (s == "all") return View::all;
  if (s == "active") return View::active;
  if (s == "inactive") return View::inactive;
  if (s == "customer") return View::customer;
  if (s == "noncustomer") return View::noncustomer;
  throw Error("unknown view: " + std::string(s));
}

Sequence Session::sequence() const {
  Sequence out;
  out.reserve(elements.size());
  for (const auto& e : elements) out.push_back(e.page);
  return out;
}

void SessionConfig::validate() const {
  if (page_stay_limit <= Millis::zero()) throw Error("page_stay_limit must be > 0");
  if (total_duration_limit && *total_duration_limit <= Millis::zero()) {
    throw Error("total_duration_limit must be > 0");
  }
  if (customer_dwell_threshold && *customer_dwell_threshold <= Millis::zero()) {
    throw Error("customer_dwell_threshold must be > 0");
  }
}

std::string visitor_key(const LogRecord& record) { return client_key(record); }

Sequence to_page_occurrences(const std::vector<ConceptId>& concepts) {
  std::unordered_map<std::string_view, std::uint32_t> seen;
  Sequence out;
  out.reserve(concepts.size());
  for (const auto& c : concepts) out.push_back({c, ++seen[c]});
  return out;
}

namespace {

void finish_session(std::vector<Session>& out, const std::string& visitor,
                    std::vector<ConceptId>& concepts, std::vector<Instant>& entries) {
  if (concepts.empty()) return;
  Session s;
  s.visitor = visitor;
  s.start = entries.front();
  auto pages = to_page_occurrences(concepts);
  for (std::size_t i = 0; i < pages.size(); ++i) {
    SessionElement e{std::move(pages[i]), entries[i], std::nullopt};
    if (i + 1 < pages.size()) e.dwell = entries[i + 1] - entries[i];
    s.elements.push_back(std::move(e));
  }
  out.push_back(std::move(s));
  concepts.clear();
  entries.clear();
}

}  // namespace

std::vector<Session> segment_sessions(const std::vector<LogRecord>& records,
                                      const ConceptHierarchy& h, const SessionConfig& cfg) {
  cfg.validate();
  std::vector<Session> out;
  std::vector<ConceptId> concepts;
  std::vector<Instant> entries;
  std::string last_key;
  Instant last_request{};
  for (const auto& r : records) {
    const ConceptId& concept_id = h.map_url(r.url_path, r.query_string);
    bool boundary = concepts.empty() || r.timestamp - last_request > cfg.page_stay_limit ||
                    (cfg.total_duration_limit && r.timestamp - entries.front() > *cfg.total_duration_limit);
    if (boundary) finish_session(out, visitor_key(r), concepts, entries);
    std::string key = cfg.dedup == DedupMode::url ? r.request_target() : concept_id;
    last_request = r.timestamp;
    if (!concepts.empty() && key == last_key) continue;
    last_key = std::move(key);
    concepts.push_back(concept_id);
    entries.push_back(r.timestamp);
  }
  if (!records.empty()) finish_session(out, visitor_key(records.back()), concepts, entries);
  return out;
}

namespace {

bool qualifies_as_target(const SessionElement& e, const ConceptHierarchy& h,
                         const SessionConfig& cfg) {
  if (h.role_of(e.page.concept_id) != Role::target) return false;
  if (!cfg.customer_dwell_threshold) return true;
  if (!e.dwell) return cfg.final_dwell_counts;
  return *e.dwell >= *cfg.customer_dwell_threshold;
}

}  // namespace

Classification classify_session(const Session& s, const ConceptHierarchy& h,
                                const SessionConfig& cfg) {
  std::optional<std::size_t> first_action;
  std::optional<std::size_t> first_target;
  for (std::size_t i = 0; i < s.elements.size(); ++i) {
    if (!first_action && h.role_of(s.elements[i].page.concept_id) == Role::action) first_action = i;
    if (!first_target && qualifies_as_target(s.elements[i], h, cfg)) first_target = i;
  }
  Classification c;
  if (first_target && (!first_action || *first_target < *first_action)) {
    c.diagnostic = "session of " + s.visitor + " at " + format_instant(s.start) +
                   " reaches target '" + s.elements[*first_target].page.concept_id +
                   "' before any action page";
  }
  if (!first_action) {
    c.label = ActivityClass::inactive;
  } else if (first_target) {
    c.label = ActivityClass::customer;
  } else {
    c.label = ActivityClass::noncustomer;
  }
  return c;
}

void relabel_success(Session& s, const ConceptHierarchy& h, const SessionConfig& cfg) {
  if (!cfg.success_relabel || s.label != ActivityClass::customer) return;
  std::vector<ConceptId> concepts;
  concepts.reserve(s.elements.size());
  for (const auto& e : s.elements) {
    concepts.push_back(qualifies_as_target(e, h, cfg) ? *cfg.success_relabel : e.page.concept_id);
  }
  auto pages = to_page_occurrences(concepts);
  for (std::size_t i = 0; i < pages.size(); ++i) s.elements[i].page = std::move(pages[i]);
}

std::vector<Sequence> SessionLog::sequences() const {
  std::vector<Sequence> out;
  out.reserve(sessions_.size());
  for (const auto& s : sessions_) out.push_back(s.sequence());
  return out;
}

SessionLog SessionLog::active() const {
  SessionLog out;
  for (const auto& s : sessions_) {
    if (s.label != ActivityClass::inactive) out.add(s);
  }
  return out;
}

SessionLog SessionLog::with_label(ActivityClass c) const {
  SessionLog out;
  for (const auto& s : sessions_) {
    if (s.label == c) out.add(s);
  }
  return out;
}

void SessionLog::sort() {
  std::stable_sort(sessions_.begin(), sessions_.end(), [](const Session& a, const Session& b) {
    return std::tie(a.start, a.visitor) < std::tie(b.start, b.visitor);
  });
}

const SessionLog& Partition::view(View v) const {
  switch (v) {
    case View::all: return all;
    case View::active: return active;
    case View::inactive: return inactive;
    case View::customer: return customer;
    case View::noncustomer: return noncustomer;
  }
  return all;
}

Partition partition_log(const SessionLog& log) {
  Partition p;
  p.all = log;
  for (const auto& s : log.sessions()) {
    switch (s.label) {
      case ActivityClass::inactive:
        p.inactive.add(s);
        break;
      case ActivityClass::customer:
        p.active.add(s);
        p.customer.add(s);
        break;
      case ActivityClass::noncustomer:
        p.active.add(s);
        p.noncustomer.add(s);
        break;
    }
  }
  return p;
}

SessionLog sessionize(const std::vector<LogRecord>& records, const ConceptHierarchy& h,
                      const SessionConfig& cfg, SessionizeReport* report) {
  cfg.validate();
  if (cfg.success_relabel) {
    if (!h.contains(*cfg.success_relabel) || h.role_of(*cfg.success_relabel) != Role::target) {
      throw Error("success concept '" + *cfg.success_relabel +
                  "' must be declared in the hierarchy with target role");
    }
  }
  std::map<std::string, std::vector<LogRecord>> by_visitor;
  for (const auto& r : records) by_visitor[visitor_key(r)].push_back(r);

  SessionLog log;
  for (auto& [key, recs] : by_visitor) {
    std::stable_sort(recs.begin(), recs.end(), [](const LogRecord& a, const LogRecord& b) {
      return a.timestamp < b.timestamp;
    });
    for (auto& s : segment_sessions(recs, h, cfg)) {
      auto c = classify_session(s, h, cfg);
      s.label = c.label;
      if (c.diagnostic && report) report->diagnostics.push_back(*c.diagnostic);
      relabel_success(s, h, cfg);
      log.add(std::move(s));
    }
  }
  log.sort();
  if (report) report->sessions = log.size();
  return log;
}

std::string session_to_json_line(const Session& s) {
  nlohmann::ordered_json j;
  j["visitor"] = s.visitor;
  j["start"] = format_instant(s.start);
  j["label"] = to_string(s.label);
  j["elements"] = nlohmann::ordered_json::array();
  for (const auto& e : s.elements) {
    nlohmann::ordered_json je;
    je["concept"] = e.page.concept_id;
    je["occ"] = e.page.occurrence;
    je["t"] = format_instant(e.entry);
    if (e.dwell) je["dwell"] = static_cast<double>(e.dwell->count()) / 1000.0;
    j["elements"].push_back(std::move(je));
  }
  return j.dump();
}

Session session_from_json_line(std::string_view line) {
  try {
    auto j = nlohmann::json::parse(line);
    Session s;
    s.visitor = j.at("visitor").get<std::string>();
    s.start = parse_instant(j.at("start").get<std::string>());
    s.label = parse_activity_class(j.at("label").get<std::string>());
    for (const auto& je : j.at("elements")) {
      SessionElement e;
      e.page.concept_id = je.at("concept").get<std::string>();
      e.page.occurrence = je.at("occ").get<std::uint32_t>();
      if (e.page.occurrence == 0) throw Error("occurrence must be >= 1");
      e.entry = parse_instant(je.at("t").get<std::string>());
      if (je.contains("dwell") && !je["dwell"].is_null()) {
        e.dwell = Millis(std::llround(je["dwell"].get<double>() * 1000.0));
      }
      s.elements.push_back(std::move(e));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed session record: ") + e.what());
  }
}

void write_session_store(const SessionLog& log, std::ostream& out) {
  for (const auto& s : log.sessions()) out << session_to_json_line(s) << '\n';
}

SessionLog read_session_store(std::istream& in) {
  SessionLog log;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      log.add(session_from_json_line(line));
    } catch (const Error& e) {
      throw Error("session store line " + std::to_string(n) + ": " + e.what());
    }
  }
  return log;
}

void write_session_store_file(const SessionLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write session store: " + path);
  write_session_store(log, out);
}

SessionLog read_session_store_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open session store: " + path);
  return read_session_store(in);
}

}  // namespace wum
