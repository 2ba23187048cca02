#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wum/core.hpp"

namespace wum {

enum class LogFormat { common, combined };

LogFormat parse_log_format(std::string_view name);

/// One access-log line. `-` fields in the log become empty optionals.
struct LogRecord {
  std::string client_host;
  std::optional<std::string> ident;
  std::optional<std::string> auth_user;
  Instant timestamp;
  int utc_offset_minutes = 0;
  std::string method;
  std::string url_path;
  std::optional<std::string> query_string;
  std::string protocol;
  int status = 0;
  std::optional<std::uint64_t> bytes;
  std::optional<std::string> referrer;
  std::optional<std::string> user_agent;

  /// Path plus "?query" when a query string is present.
  std::string request_target() const;
};

class LogParseError : public Error {
 public:
  LogParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses one line (no trailing newline). Throws LogParseError carrying
/// `line_number` on malformed input.
LogRecord parse_log_line(std::string_view line, LogFormat format, std::size_t line_number = 0);

struct IngestReport {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t parse_errors = 0;
};

/// Reads a plain-text or gzip log. With `strict` the first malformed line
/// aborts; otherwise malformed lines are skipped and counted.
std::vector<LogRecord> read_log_file(const std::filesystem::path& path, LogFormat format,
                                     bool strict, IngestReport& report);

struct CleaningConfig {
  std::vector<std::string> ignore_extensions{".gif", ".jpg", ".jpeg", ".png", ".bmp",
                                             ".ico", ".svg", ".webp", ".tif", ".tiff"};
  /// Case-insensitive ECMAScript regexes searched in the user agent.
  std::vector<std::string> ignore_agent_patterns{"bot", "crawl", "spider", "slurp",
                                                 "archiver", "wget", "curl", "httrack",
                                                 "teleport", "webzip", "offline"};
  double min_human_inter_request_seconds = 1.0;
  bool empty_referrer_heuristic_enabled = true;
  std::size_t empty_referrer_min_requests = 5;

  void validate() const;
};

/// Exact per-rule removal counts; serialized as a flat JSON object.
struct CleaningReport {
  std::size_t input = 0;
  std::size_t output = 0;
  std::size_t images_removed = 0;
  std::size_t robot_agents_removed = 0;
  std::size_t empty_referrer_clients_removed = 0;
  std::size_t fast_clients_removed = 0;
  std::size_t parse_errors = 0;

  std::size_t removed() const {
    return images_removed + robot_agents_removed + empty_referrer_clients_removed +
           fast_clients_removed;
  }
  std::string to_json() const;
};

/// client_host + user agent; also the visitor key used for sessionizing.
std::string client_key(const LogRecord& record);

struct NonhumanClients {
  std::set<std::string> empty_referrer;
  std::set<std::string> too_fast;

  bool contains(const std::string& key) const {
    return empty_referrer.count(key) != 0 || too_fast.count(key) != 0;
  }
};

NonhumanClients detect_nonhuman_clients(const std::vector<LogRecord>& records,
                                        const CleaningConfig& config);

std::vector<LogRecord> clean_records(const std::vector<LogRecord>& records,
                                     const CleaningConfig& config, CleaningReport& report);

}  // namespace wum
