#include "wum/log_ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <memory>
#include <regex>

#include "json.hpp"

namespace wum {

LogFormat parse_log_format(std::string_view name) {
  if (name == "common" || name == "clf") return LogFormat::common;
  if (name == "combined") return LogFormat::combined;
  throw Error("unknown log format: " + std::string(name));
}

std::string LogRecord::request_target() const {
  return query_string ? url_path + "?" + *query_string : url_path;
}

LogParseError::LogParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

class LineCursor {
 public:
  LineCursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw LogParseError(line_, what + " at column " + std::to_string(pos_ + 1));
  }

  void skip_spaces() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  bool at_end() {
    skip_spaces();
    return pos_ >= text_.size();
  }

  std::string_view token() {
    skip_spaces();
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ') ++pos_;
    if (start == pos_) fail("missing field");
    return text_.substr(start, pos_ - start);
  }

  std::string_view bracketed() {
    skip_spaces();
    if (pos_ >= text_.size() || text_[pos_] != '[') fail("expected '['");
    std::size_t close = text_.find(']', pos_);
    if (close == std::string_view::npos) fail("unterminated '['");
    auto out = text_.substr(pos_ + 1, close - pos_ - 1);
    pos_ = close + 1;
    return out;
  }

  std::string quoted() {
    skip_spaces();
    if (pos_ >= text_.size() || text_[pos_] != '"') fail("expected '\"'");
    ++pos_;
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_++];
      if (c == '\\' && pos_ < text_.size()) {
        out += text_[pos_++];
      } else if (c == '"') {
        return out;
      } else {
        out += c;
      }
    }
    fail("unterminated quoted field");
  }

 private:
  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::optional<std::string> dash_to_absent(std::string_view v) {
  if (v == "-" || v.empty()) return std::nullopt;
  return std::string(v);
}

int month_index(std::string_view m) {
  static constexpr std::array<std::string_view, 12> names{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                          "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == m) return static_cast<int>(i) + 1;
  }
  return 0;
}

template <typename T>
bool to_number(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

// 12/Oct/1999:10:00:00 +0200
bool parse_clf_time(std::string_view s, Instant& out, int& offset_minutes) {
  using namespace std::chrono;
  if (s.size() != 26 || s[2] != '/' || s[6] != '/' || s[11] != ':' || s[14] != ':' ||
      s[17] != ':' || s[20] != ' ' || (s[21] != '+' && s[21] != '-')) {
    return false;
  }
  int d = 0, y = 0, hh = 0, mm = 0, ss = 0, oh = 0, om = 0;
  int mon = month_index(s.substr(3, 3));
  if (mon == 0 || !to_number(s.substr(0, 2), d) || !to_number(s.substr(7, 4), y) ||
      !to_number(s.substr(12, 2), hh) || !to_number(s.substr(15, 2), mm) ||
      !to_number(s.substr(18, 2), ss) || !to_number(s.substr(22, 2), oh) ||
      !to_number(s.substr(24, 2), om)) {
    return false;
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mon)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60 || om > 59) return false;
  offset_minutes = (s[21] == '-' ? -1 : 1) * (oh * 60 + om);
  out = Instant{sys_days{ymd}} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
  return true;
}

}  // namespace

LogRecord parse_log_line(std::string_view line, LogFormat format, std::size_t line_number) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  LineCursor cur(line, line_number);
  LogRecord rec;
  rec.client_host = std::string(cur.token());
  rec.ident = dash_to_absent(cur.token());
  rec.auth_user = dash_to_absent(cur.token());
  if (!parse_clf_time(cur.bracketed(), rec.timestamp, rec.utc_offset_minutes)) {
    cur.fail("malformed timestamp");
  }

  std::string request = cur.quoted();
  {
    std::string_view req = request;
    auto sp1 = req.find(' ');
    if (sp1 == std::string_view::npos) cur.fail("malformed request line");
    rec.method = std::string(req.substr(0, sp1));
    auto rest = req.substr(sp1 + 1);
    auto sp2 = rest.rfind(' ');
    std::string_view target = rest;
    if (sp2 != std::string_view::npos && rest.substr(sp2 + 1).rfind("HTTP/", 0) == 0) {
      rec.protocol = std::string(rest.substr(sp2 + 1));
      target = rest.substr(0, sp2);
    }
    auto q = target.find('?');
    if (q != std::string_view::npos) {
      rec.query_string = std::string(target.substr(q + 1));
      target = target.substr(0, q);
    }
    if (target.empty()) cur.fail("empty url path");
    rec.url_path = std::string(target);
  }

  if (!to_number(cur.token(), rec.status) || rec.status < 100 || rec.status > 599) {
    cur.fail("malformed status");
  }
  auto bytes = cur.token();
  if (bytes != "-") {
    std::uint64_t b = 0;
    if (!to_number(bytes, b)) cur.fail("malformed byte count");
    rec.bytes = b;
  }
  if (format == LogFormat::combined) {
    rec.referrer = dash_to_absent(cur.quoted());
    rec.user_agent = dash_to_absent(cur.quoted());
  }
  if (!cur.at_end()) cur.fail("trailing characters");
  return rec;
}

std::vector<LogRecord> read_log_file(const std::filesystem::path& path, LogFormat format,
                                     bool strict, IngestReport& report) {
  // gzread transparently passes through uncompressed files.
  std::unique_ptr<gzFile_s, int (*)(gzFile)> file(gzopen(path.c_str(), "rb"), gzclose);
  if (!file) throw Error("cannot open log file: " + path.string());
  std::vector<LogRecord> out;
  std::string line;
  std::array<char, 8192> buf{};
  auto flush_line = [&] {
    ++report.lines;
    if (line.empty()) return;
    try {
      out.push_back(parse_log_line(line, format, report.lines));
      ++report.parsed;
    } catch (const LogParseError&) {
      ++report.parse_errors;
      if (strict) throw;
    }
  };
  while (gzgets(file.get(), buf.data(), static_cast<int>(buf.size())) != nullptr) {
    std::string_view chunk(buf.data());
    bool complete = !chunk.empty() && chunk.back() == '\n';
    if (complete) chunk.remove_suffix(1);
    line.append(chunk);
    if (complete) {
      flush_line();
      line.clear();
    }
  }
  if (!line.empty()) flush_line();
  return out;
}

void CleaningConfig::validate() const {
  if (!(min_human_inter_request_seconds > 0)) {
    throw Error("min_human_inter_request_seconds must be > 0");
  }
}

std::string CleaningReport::to_json() const {
  nlohmann::json j{{"input", input},
                   {"output", output},
                   {"images_removed", images_removed},
                   {"robot_agents_removed", robot_agents_removed},
                   {"empty_referrer_clients_removed", empty_referrer_clients_removed},
                   {"fast_clients_removed", fast_clients_removed},
                   {"parse_errors", parse_errors}};
  return j.dump();
}

std::string client_key(const LogRecord& record) {
  return record.client_host + "|" + record.user_agent.value_or("-");
}

NonhumanClients detect_nonhuman_clients(const std::vector<LogRecord>& records,
                                        const CleaningConfig& config) {
  config.validate();
  std::map<std::string, std::vector<const LogRecord*>> by_client;
  for (const auto& r : records) by_client[client_key(r)].push_back(&r);

  const auto min_gap = std::chrono::duration_cast<Millis>(
      std::chrono::duration<double>(config.min_human_inter_request_seconds));
  NonhumanClients out;
  for (auto& [key, recs] : by_client) {
    std::stable_sort(recs.begin(), recs.end(), [](const LogRecord* a, const LogRecord* b) {
      return a->timestamp < b->timestamp;
    });
    if (config.empty_referrer_heuristic_enabled &&
        recs.size() >= config.empty_referrer_min_requests &&
        std::all_of(recs.begin(), recs.end(), [](const LogRecord* r) { return !r->referrer; })) {
      out.empty_referrer.insert(key);
    }
    for (std::size_t i = 1; i < recs.size(); ++i) {
      if (recs[i]->timestamp - recs[i - 1]->timestamp < min_gap) {
        out.too_fast.insert(key);
        break;
      }
    }
  }
  return out;
}

namespace {

bool has_ignored_extension(const std::string& path, const std::vector<std::string>& exts) {
  for (const auto& ext : exts) {
    if (path.size() < ext.size()) continue;
    bool match = std::equal(ext.rbegin(), ext.rend(), path.rbegin(), [](char a, char b) {
      return std::tolower(static_cast<unsigned char>(a)) ==
             std::tolower(static_cast<unsigned char>(b));
    });
    if (match) return true;
  }
  return false;
}

}  // namespace

std::vector<LogRecord> clean_records(const std::vector<LogRecord>& records,
                                     const CleaningConfig& config, CleaningReport& report) {
  config.validate();
  std::vector<std::regex> robots;
  for (const auto& p : config.ignore_agent_patterns) {
    robots.emplace_back(p, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  }
  report.input += records.size();

  std::vector<LogRecord> kept;
  kept.reserve(records.size());
  for (const auto& r : records) {
    if (has_ignored_extension(r.url_path, config.ignore_extensions)) {
      ++report.images_removed;
      continue;
    }
    if (r.user_agent && std::any_of(robots.begin(), robots.end(), [&](const std::regex& re) {
          return std::regex_search(*r.user_agent, re);
        })) {
      ++report.robot_agents_removed;
      continue;
    }
    kept.push_back(r);
  }

  auto flagged = detect_nonhuman_clients(kept, config);
  std::vector<LogRecord> out;
  out.reserve(kept.size());
  for (auto& r : kept) {
    auto key = client_key(r);
    if (flagged.empty_referrer.count(key) != 0) {
      ++report.empty_referrer_clients_removed;
    } else if (flagged.too_fast.count(key) != 0) {
      ++report.fast_clients_removed;
    } else {
      out.push_back(std::move(r));
    }
  }
  report.output += out.size();
  return out;
}

}  // namespace wum
