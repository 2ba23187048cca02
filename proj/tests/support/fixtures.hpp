#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "wum/core.hpp"
#include "wum/sessionizer.hpp"
#include "wum/taxonomy.hpp"

#ifndef WUM_DATA_DIR
#error "WUM_DATA_DIR must point at the repository's data directory"
#endif

namespace fixtures {

inline std::string data_path(const std::string& rel) { return std::string(WUM_DATA_DIR) + "/" + rel; }

inline wum::ConceptHierarchy catalog_hierarchy() {
  return wum::load_hierarchy_file(data_path("example/hierarchy.json"));
}

/// The three sessions of the catalog example, as page occurrences.
inline std::vector<wum::Sequence> catalog_sequences() {
  return {
      {{"ParamA", 1}, {"ShortList", 1}, {"ShortList", 2}, {"TextOnlyDescr", 1}, {"TextOnlyDescr", 2}},
      {{"ParamA", 1}, {"LongList", 1}, {"ParamA&B", 1}, {"LongList", 2}, {"TextOnlyDescr", 1}},
      {{"ParamA", 1}, {"LongList", 1}, {"ButtonX", 1}, {"LongList", 2}},
  };
}

inline wum::Instant at_minute(int m) {
  return wum::Instant{} + std::chrono::hours(24 * 365 * 30) + std::chrono::minutes(m);
}

/// Session with elements 30 s apart, numbered by occurrence.
inline wum::Session make_session(const std::string& visitor, const std::vector<std::string>& concepts,
                                 int start_minute = 0) {
  wum::Session s;
  s.visitor = visitor;
  s.start = at_minute(start_minute);
  auto pages = wum::to_page_occurrences(concepts);
  for (std::size_t i = 0; i < pages.size(); ++i) {
    wum::SessionElement e;
    e.page = pages[i];
    e.entry = s.start + std::chrono::seconds(30 * static_cast<long>(i));
    if (i + 1 < pages.size()) e.dwell = wum::Millis(30000);
    s.elements.push_back(std::move(e));
  }
  return s;
}

/// Classifies every session without a dwell threshold.
inline wum::SessionLog classified(const wum::ConceptHierarchy& h, std::vector<wum::Session> sessions) {
  wum::SessionConfig cfg;
  cfg.customer_dwell_threshold.reset();
  cfg.success_relabel.reset();
  wum::SessionLog log;
  for (auto& s : sessions) {
    s.label = wum::classify_session(s, h, cfg).label;
    log.add(std::move(s));
  }
  return log;
}

inline wum::SessionLog catalog_log() {
  std::vector<wum::Session> sessions;
  int i = 0;
  for (const auto& seq : catalog_sequences()) {
    std::vector<std::string> concepts;
    for (const auto& p : seq) concepts.push_back(p.concept_id);
    sessions.push_back(make_session("v" + std::to_string(i), concepts, 10 * i));
    ++i;
  }
  return classified(catalog_hierarchy(), std::move(sessions));
}

/// P is the only action page, T the only target.
inline wum::ConceptHierarchy funnel_hierarchy() {
  using wum::Concept;
  using wum::Role;
  return wum::ConceptHierarchy(
      {
          Concept{"Site", "", std::nullopt, Role::other, 0},
          Concept{"P", "", "Site", Role::action, 0},
          Concept{"A", "", "Site", Role::other, 0},
          Concept{"B", "", "Site", Role::other, 0},
          Concept{"C", "", "Site", Role::other, 0},
          Concept{"T", "", "Site", Role::target, 0},
          Concept{"Other", "", "Site", Role::other, 0},
      },
      {}, "Other");
}

/// 20 P->A->T, 10 P->B->T, 20 P->B, 40 P->C, 10 P.
inline wum::SessionLog funnel_log() {
  std::vector<wum::Session> sessions;
  auto add = [&](int n, const std::vector<std::string>& concepts) {
    for (int i = 0; i < n; ++i) {
      sessions.push_back(make_session("f" + std::to_string(sessions.size()), concepts,
                                      static_cast<int>(sessions.size())));
    }
  };
  add(20, {"P", "A", "T"});
  add(10, {"P", "B", "T"});
  add(20, {"P", "B"});
  add(40, {"P", "C"});
  add(10, {"P"});
  return classified(funnel_hierarchy(), std::move(sessions));
}

}  // namespace fixtures
