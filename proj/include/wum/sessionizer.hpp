#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wum/core.hpp"
#include "wum/log_ingest.hpp"
#include "wum/taxonomy.hpp"

namespace wum {

enum class ActivityClass { inactive, noncustomer, customer };

std::string_view to_string(ActivityClass c);
ActivityClass parse_activity_class(std::string_view s);

struct SessionElement {
  PageOccurrence page;
  Instant entry;
  /// Time until the next element of the same session; unknown for the last.
  std::optional<Millis> dwell;

  friend bool operator==(const SessionElement&, const SessionElement&) = default;
};

struct Session {
  std::string visitor;
  Instant start;
  ActivityClass label = ActivityClass::inactive;
  std::vector<SessionElement> elements;

  Sequence sequence() const;
  friend bool operator==(const Session&, const Session&) = default;
};

/// Which consecutive repeats are collapsed into one element.
enum class DedupMode { url, concept_id };

struct SessionConfig {
  Millis page_stay_limit = std::chrono::minutes(4);
  std::optional<Millis> total_duration_limit;
  std::optional<Millis> customer_dwell_threshold = Millis(std::chrono::minutes(7));
  std::optional<ConceptId> success_relabel = ConceptId("/SUCCESS");
  /// Unknown dwell of a session's final element counts as meeting the
  /// customer dwell threshold.
  bool final_dwell_counts = false;
  DedupMode dedup = DedupMode::url;

  void validate() const;
};

/// host + user agent (absent agent -> "-").
std::string visitor_key(const LogRecord& record);

/// Records of one visitor, time-ordered.
std::vector<Session> segment_sessions(const std::vector<LogRecord>& records,
                                      const ConceptHierarchy& h, const SessionConfig& cfg);

/// k-th appearance of concept c gets occurrence k.
Sequence to_page_occurrences(const std::vector<ConceptId>& concepts);

struct Classification {
  ActivityClass label = ActivityClass::inactive;
  /// Set when a qualifying target precedes every action page.
  std::optional<std::string> diagnostic;
};

Classification classify_session(const Session& s, const ConceptHierarchy& h,
                                const SessionConfig& cfg);

/// Renames the qualifying target elements of a customer session to the
/// success concept and renumbers occurrences over the relabeled sequence.
void relabel_success(Session& s, const ConceptHierarchy& h, const SessionConfig& cfg);

/// Multiset of sessions; identical sessions count with multiplicity.
class SessionLog {
 public:
  SessionLog() = default;
  explicit SessionLog(std::vector<Session> sessions) : sessions_(std::move(sessions)) {}

  const std::vector<Session>& sessions() const { return sessions_; }
  std::size_t size() const { return sessions_.size(); }
  bool empty() const { return sessions_.empty(); }
  void add(Session s) { sessions_.push_back(std::move(s)); }

  std::vector<Sequence> sequences() const;
  /// Sessions whose label is active (customer or noncustomer).
  SessionLog active() const;
  SessionLog with_label(ActivityClass c) const;

  /// Sorts by (start, visitor) for a deterministic store.
  void sort();

 private:
  std::vector<Session> sessions_;
};

enum class View { all, active, inactive, customer, noncustomer };

std::string_view to_string(View v);
View parse_view(std::string_view s);

struct Partition {
  SessionLog all;
  SessionLog active;
  SessionLog inactive;
  SessionLog customer;
  SessionLog noncustomer;

  const SessionLog& view(View v) const;
};

Partition partition_log(const SessionLog& log);

struct SessionizeReport {
  std::size_t sessions = 0;
  std::vector<std::string> diagnostics;
};

/// Groups cleaned records by visitor, segments, classifies and relabels.
SessionLog sessionize(const std::vector<LogRecord>& records, const ConceptHierarchy& h,
                      const SessionConfig& cfg, SessionizeReport* report = nullptr);

/// Session store: newline-delimited JSON, one session per line.
std::string session_to_json_line(const Session& s);
Session session_from_json_line(std::string_view line);
void write_session_store(const SessionLog& log, std::ostream& out);
SessionLog read_session_store(std::istream& in);
void write_session_store_file(const SessionLog& log, const std::string& path);
SessionLog read_session_store_file(const std::string& path);

}  // namespace wum
