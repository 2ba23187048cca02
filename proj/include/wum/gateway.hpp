#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wum/log_ingest.hpp"
#include "wum/miner.hpp"
#include "wum/sessionizer.hpp"
#include "wum/taxonomy.hpp"
#include "wum/workflows.hpp"

namespace httplib {
class Server;
}

namespace wum {

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Relative paths are resolved against the directory of the config file.
struct ProjectConfig {
  std::vector<std::filesystem::path> logs;
  LogFormat log_format = LogFormat::combined;
  bool strict = false;
  std::filesystem::path hierarchy;
  std::filesystem::path store;
  std::filesystem::path output_dir;
  SessionConfig session;
  CleaningConfig cleaning;
  HeuristicConfig heuristics;
  std::optional<std::uint64_t> query_timeout_ms;

  void validate() const;
};

ProjectConfig parse_project_config(std::string_view json_text,
                                   const std::filesystem::path& base_dir = {});
ProjectConfig load_project_config(const std::filesystem::path& path);

struct PrepareResult {
  IngestReport ingest;
  CleaningReport cleaning;
  SessionizeReport sessionize;
  Partition partition;
};

/// ingest, clean, sessionize, classify; writes the store when one is configured.
PrepareResult prepare(const ProjectConfig& cfg, const ConceptHierarchy& h);

/// "all=N active=N customer=N noncustomer=N inactive=N"
std::string partition_counts_line(const Partition& p);

/// Immutable snapshot of a prepared store: the partition and one Aggregated
/// Log index per view.
class Dataset {
 public:
  Dataset(ConceptHierarchy h, SessionLog log, HeuristicConfig heuristics = {});

  const ConceptHierarchy& hierarchy() const { return h_; }
  const Partition& partition() const { return partition_; }
  const LogIndex& index(View v) const;
  const HeuristicConfig& heuristics() const { return heuristics_; }

 private:
  ConceptHierarchy h_;
  Partition partition_;
  HeuristicConfig heuristics_;
  std::map<View, LogIndex> indexes_;
};

/// Pattern references are `<view>:<g-sequence>`; ids are their hex encoding.
struct PatternRef {
  View view = View::all;
  GSequence gseq;
};

std::string pattern_id(View v, const GSequence& g);
/// Accepts an id, a `<view>:<g-sequence>` reference or a bare g-sequence
/// (taking `default_view`).
PatternRef resolve_pattern_ref(std::string_view text, View default_view = View::all);

nlohmann::ordered_json summary_json(const Dataset& ds);
/// Shared by `wum mine` and POST /api/query, so both print the same bytes.
std::string mine_json(const Dataset& ds, std::string_view query_text, View view,
                      const EvaluateOptions& options = {});
nlohmann::ordered_json contact_measures_json(const Dataset& ds, View view);
nlohmann::ordered_json conversion_measures_json(const Dataset& ds,
                                                const std::optional<ConceptId>& target,
                                                std::string_view spec);
/// The pattern with its trees; `thr` prunes them with the post-miner.
nlohmann::ordered_json pattern_json(const Dataset& ds, const PatternRef& ref,
                                    const std::optional<PostMinerConfig>& thr = {});
/// Evaluates the query on the customer and non-customer logs, pairs the
/// results and compares every paired customer pattern.
nlohmann::ordered_json compare_json(const Dataset& ds, std::string_view query_text,
                                    const std::optional<PostMinerConfig>& thr,
                                    const EvaluateOptions& options = {});

/// Node labels `concept,occ (hits)`; merged nodes are reached by dashed edges.
std::string tree_to_dot(const AggregateTree& tree, std::string_view name = "pattern");

/// Text form of a JSON document as served and printed: 2-space indent,
/// trailing newline.
std::string dump(const nlohmann::ordered_json& j);

struct HttpResponse {
  int status = 200;
  std::string body;
};

/// Request router over a snapshot. Without a dataset every API route
/// answers 409. Thread-safe: handling never mutates the service.
class Service {
 public:
  explicit Service(std::shared_ptr<const Dataset> ds, std::optional<std::uint64_t> timeout_ms = {});

  HttpResponse handle(std::string_view method, std::string_view path,
                      const std::multimap<std::string, std::string>& params,
                      std::string_view body) const;

 private:
  EvaluateOptions options_for(const nlohmann::json& body) const;

  std::shared_ptr<const Dataset> ds_;
  std::optional<std::uint64_t> timeout_ms_;
};

/// Server routing every request through `service`; not yet listening.
std::unique_ptr<httplib::Server> make_server(const Service& service);

/// CLI entry point. Returns the process exit status.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wum
