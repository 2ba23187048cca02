#include "wum/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <numeric>
#include <set>
#include <sstream>

namespace wum {

namespace {

constexpr const char* kHome = "HOME";
constexpr const char* kInfo = "INFO";
constexpr const char* kExit = "EXIT";
const std::vector<std::string> kBrowse{"LIST", "LIST", "DESCR", "MAP"};

std::uint64_t scaled(const Ratio& r, std::uint64_t n) {
  // half-up rounding of r * n
  auto num = static_cast<unsigned __int128>(r.num) * n * 2 + r.den;
  return static_cast<std::uint64_t>(num / (static_cast<unsigned __int128>(r.den) * 2));
}

/// Portable helpers: the standard distributions and std::shuffle are allowed
/// to differ between library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

Ratio ratio_field(const nlohmann::json& j, const char* key, std::optional<Ratio> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw Error(std::string("scenario: missing field '") + key + "'");
  }
  const auto& v = j.at(key);
  if (v.is_string()) return parse_decimal(v.get<std::string>());
  if (!v.is_number()) throw Error(std::string("scenario: field '") + key + "' must be a number");
  double d = v.get<double>();
  if (d < 0) throw Error(std::string("scenario: field '") + key + "' must be non-negative");
  return Ratio{static_cast<std::uint64_t>(std::llround(d * 1e6)), 1000000};
}

/// Distributes count[i] sessions to strategy i cyclically, so no session gets
/// the same strategy twice and loads differ by at most one.
std::vector<std::vector<std::size_t>> assign(const std::vector<std::uint64_t>& counts,
                                             std::uint64_t sessions) {
  std::vector<std::vector<std::size_t>> out(sessions);
  if (sessions == 0) return out;
  std::uint64_t ptr = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::uint64_t k = 0; k < counts[i]; ++k) out[(ptr + k) % sessions].push_back(i);
    ptr = (ptr + counts[i]) % sessions;
  }
  return out;
}

struct Builder {
  Rng& rng;
  std::vector<ConceptId> concepts;
  std::vector<Millis> dwell_before_next;

  void add(const ConceptId& c, Millis dwell = std::chrono::seconds(30)) {
    concepts.push_back(c);
    dwell_before_next.push_back(dwell);
  }
  void browse(std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) add(kBrowse[rng.below(kBrowse.size())]);
  }
  Session finish(std::string visitor, Instant start, ActivityClass label) {
    Session s;
    s.visitor = std::move(visitor);
    s.start = start;
    s.label = label;
    auto pages = to_page_occurrences(concepts);
    Instant t = start;
    for (std::size_t i = 0; i < pages.size(); ++i) {
      SessionElement e{pages[i], t, std::nullopt};
      if (i + 1 < pages.size()) e.dwell = dwell_before_next[i];
      t += dwell_before_next[i];
      s.elements.push_back(std::move(e));
    }
    return s;
  }
};

}  // namespace

void ScenarioSpec::validate() const {
  if (sessions == 0) throw Error("scenario: sessions must be positive");
  const Ratio one{1, 1};
  if (inactive_share > one || customer_share > one) throw Error("scenario: shares must lie in [0,1]");
  std::set<ConceptId> names;
  Ratio c_sum{0, 1};
  Ratio n_sum{0, 1};
  auto add = [](Ratio a, Ratio b) {
    auto l = std::lcm(a.den, b.den);
    Ratio r{a.num * (l / a.den) + b.num * (l / b.den), l};
    auto g = std::gcd(r.num, r.den);
    return g > 1 ? Ratio{r.num / g, r.den / g} : r;
  };
  for (const auto& s : strategies) {
    if (s.concept_id.empty() || !names.insert(s.concept_id).second) {
      throw Error("scenario: strategy concepts must be non-empty and distinct");
    }
    auto nc = s.noncustomer_share.value_or(s.share);
    if (s.share > one || nc > one || s.conversion > one) {
      throw Error("scenario: strategy '" + s.concept_id + "' has a share or rate above 1");
    }
    c_sum = add(c_sum, s.share);
    n_sum = add(n_sum, nc);
  }
  if (c_sum > Ratio{2, 1} || n_sum > Ratio{2, 1}) {
    throw Error("scenario: infeasible shares (a session invokes at most two strategies)");
  }
  if (names.count(filler_strategy) || names.count(success)) {
    throw Error("scenario: filler and success concepts must differ from the strategies");
  }
}

ScenarioSpec parse_scenario(std::string_view json_text) {
  try {
    auto j = nlohmann::json::parse(json_text);
    ScenarioSpec s;
    s.seed = j.value("seed", s.seed);
    s.sessions = j.value("sessions", s.sessions);
    s.inactive_share = ratio_field(j, "inactive_share", s.inactive_share);
    s.customer_share = ratio_field(j, "customer_share", s.customer_share);
    s.success = j.value("success", s.success);
    s.filler_strategy = j.value("filler_strategy", s.filler_strategy);
    for (const auto& js : j.at("strategies")) {
      StrategySpec st;
      st.concept_id = js.at("concept").get<std::string>();
      st.share = ratio_field(js, "share");
      st.conversion = ratio_field(js, "conversion");
      if (js.contains("noncustomer_share")) st.noncustomer_share = ratio_field(js, "noncustomer_share");
      s.strategies.push_back(std::move(st));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed scenario: ") + e.what());
  }
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

nlohmann::ordered_json GroundTruth::to_json() const {
  nlohmann::ordered_json j;
  j["all"] = all;
  j["active"] = active;
  j["inactive"] = inactive;
  j["customer"] = customer;
  j["noncustomer"] = noncustomer;
  j["strategies"] = nlohmann::ordered_json::array();
  for (const auto& s : strategies) {
    nlohmann::ordered_json js;
    js["concept"] = s.concept_id;
    js["customer_sessions"] = s.customer_sessions;
    js["short_conversions"] = s.short_conversions;
    js["noncustomer_sessions"] = s.noncustomer_sessions;
    j["strategies"].push_back(std::move(js));
  }
  return j;
}

GeneratedScenario generate(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  GeneratedScenario out;
  auto& truth = out.truth;
  truth.all = spec.sessions;
  truth.inactive = scaled(spec.inactive_share, spec.sessions);
  truth.active = truth.all - truth.inactive;
  truth.customer = scaled(spec.customer_share, truth.active);
  truth.noncustomer = truth.active - truth.customer;

  const std::size_t n = spec.strategies.size();
  const std::size_t filler = n;  // index of the filler strategy
  std::vector<std::uint64_t> c_counts;
  std::vector<std::uint64_t> n_counts;
  for (const auto& s : spec.strategies) {
    c_counts.push_back(scaled(s.share, truth.customer));
    n_counts.push_back(scaled(s.noncustomer_share.value_or(s.share), truth.noncustomer));
    truth.strategies.push_back({s.concept_id, 0, 0, 0});
  }

  auto customers = assign(c_counts, truth.customer);
  auto noncustomers = assign(n_counts, truth.noncustomer);
  for (auto* group : {&customers, &noncustomers}) {
    for (auto& s : *group) {
      if (s.empty()) s.push_back(filler);
      if (s.size() > 2) throw Error("scenario: infeasible shares after rounding session counts");
    }
    rng.shuffle(*group);
  }

  // Which customer sessions of each strategy convert over short paths.
  std::vector<std::vector<bool>> short_path(customers.size());
  for (std::size_t i = 0; i < customers.size(); ++i) short_path[i].assign(customers[i].size(), false);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::pair<std::size_t, std::size_t>> holders;
    for (std::size_t i = 0; i < customers.size(); ++i) {
      for (std::size_t j = 0; j < customers[i].size(); ++j) {
        if (customers[i][j] == k) holders.emplace_back(i, j);
      }
    }
    rng.shuffle(holders);
    auto quota = scaled(spec.strategies[k].conversion, holders.size());
    for (std::uint64_t q = 0; q < quota; ++q) short_path[holders[q].first][holders[q].second] = true;
  }

  struct Planned {
    ActivityClass label;
    std::size_t index;
  };
  std::vector<Planned> order;
  for (std::uint64_t i = 0; i < truth.inactive; ++i) order.push_back({ActivityClass::inactive, i});
  for (std::size_t i = 0; i < customers.size(); ++i) order.push_back({ActivityClass::customer, i});
  for (std::size_t i = 0; i < noncustomers.size(); ++i) order.push_back({ActivityClass::noncustomer, i});
  rng.shuffle(order);

  auto name = [&](std::size_t k) -> const ConceptId& {
    return k == filler ? spec.filler_strategy : spec.strategies[k].concept_id;
  };
  const Instant base = std::chrono::sys_days{std::chrono::year{1999} / 10 / 1};
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    Builder b{rng, {}, {}};
    b.add(kHome);
    const auto& plan = order[idx];
    if (plan.label == ActivityClass::inactive) {
      for (auto i = rng.below(4); i > 0; --i) b.add(kInfo);
    } else if (plan.label == ActivityClass::noncustomer) {
      for (auto k : noncustomers[plan.index]) {
        b.add(name(k));
        b.browse(rng.below(5));
        if (k != filler) ++truth.strategies[k].noncustomer_sessions;
      }
    } else {
      auto strategies = customers[plan.index];
      auto flags = short_path[plan.index];
      // The short-path strategy goes last so both gaps can be honoured.
      if (strategies.size() == 2 && flags[0] && !flags[1]) {
        std::swap(strategies[0], strategies[1]);
        std::swap(flags[0], flags[1]);
      }
      bool last_short = flags.back();
      std::uint64_t tail = last_short ? rng.between(0, strategies.size() == 2 && flags[0] ? 2 : 3)
                                      : rng.between(4, 6);
      if (strategies.size() == 2) {
        b.add(name(strategies[0]));
        std::uint64_t lead = flags[0] ? rng.between(0, 2 - tail)
                                      : (tail >= 3 ? 0 : 3 - tail) + rng.between(0, 2);
        b.browse(lead);
      }
      b.add(name(strategies.back()));
      b.browse(tail);
      b.add(spec.success, std::chrono::minutes(8));
      b.add(kExit);
      for (std::size_t j = 0; j < strategies.size(); ++j) {
        if (strategies[j] == filler) continue;
        ++truth.strategies[strategies[j]].customer_sessions;
        if (flags[j]) ++truth.strategies[strategies[j]].short_conversions;
      }
    }
    out.log.add(b.finish("synth-" + std::to_string(idx), base + std::chrono::minutes(idx), plan.label));
  }
  return out;
}

ConceptHierarchy scenario_hierarchy(const ScenarioSpec& spec) {
  std::vector<Concept> concepts;
  auto add = [&](const ConceptId& id, std::optional<ConceptId> parent, Role role) {
    concepts.push_back(Concept{id, id, std::move(parent), role, 0});
  };
  add("SITE", std::nullopt, Role::other);
  add(kHome, "SITE", Role::other);
  add(kInfo, "SITE", Role::other);
  add(kExit, "SITE", Role::other);
  add("SEARCH", "SITE", Role::other);
  for (const auto& s : spec.strategies) add(s.concept_id, "SEARCH", Role::action);
  add(spec.filler_strategy, "SEARCH", Role::action);
  add("RESULTS", "SITE", Role::other);
  for (const char* c : {"LIST", "DESCR", "MAP"}) add(c, "RESULTS", Role::other);
  add("OBJECTS", "SITE", Role::other);
  add(spec.success, "OBJECTS", Role::target);
  add("OTHER", "SITE", Role::other);
  return ConceptHierarchy(std::move(concepts), {}, "OTHER");
}

}  // namespace wum
