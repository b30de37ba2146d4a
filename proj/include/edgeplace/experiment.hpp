#pragma once

// Experiment runner: scenario configuration files, bundled scenario presets,
// strategy/consumer-count sweeps, the summary CSV contract and the trend
// checks the comparison report evaluates.

#include <array>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "edgeplace/simulator.hpp"

namespace edgeplace {

// --- configuration files ----------------------------------------------------

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::string& scope,
                           std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("config field '" +
                        (scope.empty() ? key : scope + "." + key) +
                        "': unknown field");
  }
}

template <class T>
void fetch(const json& j, const std::string& scope, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" +
                      (scope.empty() ? key : scope + "." + key) +
                      "': wrong type");
  }
}

inline json range_json(const Range& r) { return json::array({r.lo, r.hi}); }
inline json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }
inline json range_json(const ByteRange& r) { return json::array({r.lo, r.hi}); }

template <class R, class V>
void fetch_range(const json& j, const std::string& scope, const char* key,
                 R& out) {
  if (!j.contains(key)) return;
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw ConfigError("config field '" + scope + "." + key +
                      "': expected [lo, hi]");
  try {
    out.lo = a[0].get<V>();
    out.hi = a[1].get<V>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + scope + "." + key + "': wrong type");
  }
}

inline json tier_json(const TierProfile& t) {
  return json{{"fraction", t.fraction},
              {"latency_ms", range_json(t.latency_ms)},
              {"capacity_bytes", range_json(t.capacity)},
              {"total_load", range_json(t.total_load)}};
}

inline void tier_from_json(const json& j, const std::string& scope,
                           TierProfile& t) {
  reject_unknown(j, scope, {"fraction", "latency_ms", "capacity_bytes",
                            "total_load"});
  fetch(j, scope, "fraction", t.fraction);
  fetch_range<Range, double>(j, scope, "latency_ms", t.latency_ms);
  fetch_range<ByteRange, Bytes>(j, scope, "capacity_bytes", t.capacity);
  fetch_range<IntRange, std::uint32_t>(j, scope, "total_load", t.total_load);
}

}  // namespace detail

inline nlohmann::json to_json(const ScenarioConfig& c) {
  using detail::range_json;
  return nlohmann::json{
      {"name", c.name},
      {"hosts", c.hosts},
      {"producers", c.producers},
      {"consumers", c.consumers},
      {"strategy", to_string(c.strategy)},
      {"seed", c.seed},
      {"world_extent", c.world_extent},
      {"tiers",
       {{"high", detail::tier_json(c.tier_high)},
        {"medium", detail::tier_json(c.tier_medium)},
        {"low", detail::tier_json(c.tier_low)}}},
      {"producer_load_fraction", c.producer_load_fraction},
      {"data_size_bytes", range_json(c.data_size)},
      {"chunk_bytes", c.chunk_bytes},
      {"consumer_mean_interarrival_ms", c.consumer_mean_interarrival_ms},
      {"subscriptions_per_consumer", c.subscriptions_per_consumer},
      {"replica_threshold", c.replica_threshold},
      {"jitter_ms", c.jitter_ms},
      {"rtree",
       {{"max_children", c.rtree_max_children},
        {"min_children", c.rtree_min_children}}},
      {"concentric_step", c.concentric_step},
      {"clusters", {{"count", c.clusters.count}, {"sigma", c.clusters.sigma}}},
      {"histogram_bins", c.histogram_bins},
      {"locations_csv", c.locations_csv},
  };
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  using detail::fetch;
  using detail::fetch_range;
  detail::reject_unknown(
      j, "",
      {"name", "hosts", "producers", "consumers", "strategy", "seed",
       "world_extent", "tiers", "producer_load_fraction", "data_size_bytes",
       "chunk_bytes", "consumer_mean_interarrival_ms",
       "subscriptions_per_consumer", "replica_threshold", "jitter_ms", "rtree",
       "concentric_step", "clusters", "histogram_bins", "locations_csv"});
  ScenarioConfig c;
  fetch(j, "", "name", c.name);
  fetch(j, "", "hosts", c.hosts);
  fetch(j, "", "producers", c.producers);
  fetch(j, "", "consumers", c.consumers);
  if (j.contains("strategy")) {
    std::string s;
    fetch(j, "", "strategy", s);
    try {
      c.strategy = parse_strategy(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config field 'strategy': ") + e.what());
    }
  }
  fetch(j, "", "seed", c.seed);
  fetch(j, "", "world_extent", c.world_extent);
  if (j.contains("tiers")) {
    const auto& t = j.at("tiers");
    detail::reject_unknown(t, "tiers", {"high", "medium", "low"});
    if (t.contains("high"))
      detail::tier_from_json(t.at("high"), "tiers.high", c.tier_high);
    if (t.contains("medium"))
      detail::tier_from_json(t.at("medium"), "tiers.medium", c.tier_medium);
    if (t.contains("low"))
      detail::tier_from_json(t.at("low"), "tiers.low", c.tier_low);
  }
  fetch(j, "", "producer_load_fraction", c.producer_load_fraction);
  fetch_range<ByteRange, Bytes>(j, "", "data_size_bytes", c.data_size);
  fetch(j, "", "chunk_bytes", c.chunk_bytes);
  fetch(j, "", "consumer_mean_interarrival_ms",
        c.consumer_mean_interarrival_ms);
  fetch(j, "", "subscriptions_per_consumer", c.subscriptions_per_consumer);
  fetch(j, "", "replica_threshold", c.replica_threshold);
  fetch(j, "", "jitter_ms", c.jitter_ms);
  if (j.contains("rtree")) {
    const auto& t = j.at("rtree");
    detail::reject_unknown(t, "rtree", {"max_children", "min_children"});
    fetch(t, "rtree", "max_children", c.rtree_max_children);
    fetch(t, "rtree", "min_children", c.rtree_min_children);
  }
  fetch(j, "", "concentric_step", c.concentric_step);
  if (j.contains("clusters")) {
    const auto& t = j.at("clusters");
    detail::reject_unknown(t, "clusters", {"count", "sigma"});
    fetch(t, "clusters", "count", c.clusters.count);
    fetch(t, "clusters", "sigma", c.clusters.sigma);
  }
  fetch(j, "", "histogram_bins", c.histogram_bins);
  fetch(j, "", "locations_csv", c.locations_csv);
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const ScenarioConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << to_json(c).dump(2) << "\n";
}

// --- bundled scenarios --------------------------------------------------------

struct SweepSpec {
  std::vector<StrategyKind> strategies;
  std::vector<std::uint32_t> consumer_counts;
  std::uint32_t replicates = 1;  // seeds base.seed, base.seed+1, ...
};

struct ExperimentPlan {
  ScenarioConfig base;
  SweepSpec sweep;
};

inline std::vector<std::string> preset_names() {
  return {"e2e_latency", "selection_time", "micro"};
}

inline ExperimentPlan preset_plan(const std::string& name) {
  ExperimentPlan plan;
  plan.base.name = name;
  plan.sweep.strategies = {StrategyKind::distance, StrategyKind::latency,
                           StrategyKind::spatial};
  if (name == "e2e_latency") {
    plan.base.hosts = 50;
    plan.base.producers = 100;
    plan.base.clusters = {6, 40.0};
    plan.sweep.consumer_counts = {200, 400, 600, 800};
    return plan;
  }
  if (name == "selection_time") {
    plan.base.hosts = 5000;
    plan.base.producers = 50;
    plan.base.clusters = {6, 40.0};
    plan.sweep.consumer_counts = {100, 200, 300, 400, 500,
                                  600, 700, 800, 900, 1000};
    return plan;
  }
  if (name == "micro") {
    // Closed-form tiny run: one producer of two chunks through one 5ms host.
    plan.base.hosts = 1;
    plan.base.producers = 1;
    plan.base.tier_high = {1.0, {5, 5}, {kGiB, kGiB}, {40, 40}};
    plan.base.tier_medium = {0.0, {10, 15}, {kGiB, kGiB}, {54, 66}};
    plan.base.tier_low = {0.0, {15, 20}, {kGiB, kGiB}, {40, 53}};
    plan.base.data_size = {2048, 2048};
    plan.sweep.consumer_counts = {1};
    return plan;
  }
  throw ConfigError("unknown scenario '" + name +
                    "' (expected e2e_latency|selection_time|micro)");
}

// --- summary CSV contract ----------------------------------------------------

struct RunRow {
  std::string scenario;
  StrategyKind strategy = StrategyKind::distance;
  std::uint32_t hosts = 0;
  std::uint32_t producers = 0;
  std::uint32_t consumers = 0;
  std::uint64_t seed = 0;
  double mean_e2e_ms = 0;
  double mean_replicas_per_producer = 0;
  double mean_replication_overhead_ms = 0;
  double mean_selection_time_ms = 0;
  std::uint64_t declines = 0;
};

inline const char* summary_csv_header() {
  return "scenario,strategy,hosts,producers,consumers,seed,mean_e2e_ms,"
         "mean_replicas_per_producer,mean_replication_overhead_ms,"
         "mean_selection_time_ms,declines";
}

inline std::string to_csv(const RunRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%u,%u,%u,%llu,%.6f,%.6f,%.6f,%.6f,%llu",
                r.scenario.c_str(), to_string(r.strategy), r.hosts, r.producers,
                r.consumers, static_cast<unsigned long long>(r.seed),
                r.mean_e2e_ms, r.mean_replicas_per_producer,
                r.mean_replication_overhead_ms, r.mean_selection_time_ms,
                static_cast<unsigned long long>(r.declines));
  return buf;
}

inline std::string render_summary_csv(const std::vector<RunRow>& rows) {
  std::string out = summary_csv_header();
  out += "\n";
  for (const auto& r : rows) {
    out += to_csv(r);
    out += "\n";
  }
  return out;
}

inline RunRow parse_csv_row(const std::string& line) {
  std::istringstream in(line);
  std::string field;
  std::vector<std::string> f;
  while (std::getline(in, field, ',')) f.push_back(field);
  if (f.size() != 11)
    throw std::invalid_argument("summary row needs 11 columns, got " +
                                std::to_string(f.size()));
  RunRow r;
  r.scenario = f[0];
  r.strategy = parse_strategy(f[1]);
  r.hosts = static_cast<std::uint32_t>(std::stoul(f[2]));
  r.producers = static_cast<std::uint32_t>(std::stoul(f[3]));
  r.consumers = static_cast<std::uint32_t>(std::stoul(f[4]));
  r.seed = std::stoull(f[5]);
  r.mean_e2e_ms = std::stod(f[6]);
  r.mean_replicas_per_producer = std::stod(f[7]);
  r.mean_replication_overhead_ms = std::stod(f[8]);
  r.mean_selection_time_ms = std::stod(f[9]);
  r.declines = std::stoull(f[10]);
  return r;
}

inline std::vector<RunRow> read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != summary_csv_header())
    throw std::runtime_error(path + ": missing or wrong header");
  std::vector<RunRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_csv_row(line));
  }
  return rows;
}

// --- sweep execution ----------------------------------------------------------

inline std::string run_tag(const ScenarioConfig& c) {
  std::ostringstream tag;
  tag << c.name << "__" << to_string(c.strategy) << "__h" << c.hosts << "_p"
      << c.producers << "_c" << c.consumers << "_seed" << c.seed;
  return tag.str();
}

inline void write_histogram_csv(const std::string& path,
                                const std::vector<HistogramBin>& bins) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "bin_low_ms,bin_high_ms,count\n";
  char buf[128];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%llu\n", b.lo, b.hi,
                  static_cast<unsigned long long>(b.count));
    out << buf;
  }
}

inline RunRow summarize_run(const ScenarioConfig& cfg, const RunResult& rr) {
  const RunSummary s = summarize(rr.ledger, cfg.histogram_bins);
  RunRow row;
  row.scenario = cfg.name;
  row.strategy = cfg.strategy;
  row.hosts = cfg.hosts;
  row.producers = cfg.producers;
  row.consumers = cfg.consumers;
  row.seed = cfg.seed;
  row.mean_e2e_ms = s.e2e.mean;
  row.mean_replicas_per_producer = s.mean_replicas_per_producer;
  row.mean_replication_overhead_ms = s.overhead.mean;
  row.mean_selection_time_ms = s.selection.mean;
  row.declines = s.declines;
  return row;
}

// Runs every (strategy, consumer count, replicate) cell of the plan. Cells
// execute independently across `workers` threads; rows come back in cell
// order regardless of scheduling. With a non-empty out_dir the summary CSV
// and per-run metric histograms are written there.
inline std::vector<RunRow> run_sweep(const ExperimentPlan& plan,
                                     std::uint32_t workers = 1,
                                     const std::string& out_dir = {}) {
  std::vector<ScenarioConfig> cells;
  for (StrategyKind s : plan.sweep.strategies)
    for (std::uint32_t count : plan.sweep.consumer_counts)
      for (std::uint32_t rep = 0; rep < plan.sweep.replicates; ++rep) {
        ScenarioConfig c = plan.base;
        c.strategy = s;
        c.consumers = count;
        c.seed = plan.base.seed + rep;
        cells.push_back(std::move(c));
      }
  for (const auto& c : cells) c.validate();

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  std::vector<RunRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const ScenarioConfig& cfg = cells[i];
      const RunResult rr = run(cfg);
      rows[i] = summarize_run(cfg, rr);
      if (!out_dir.empty()) {
        const std::string tag = out_dir + "/" + run_tag(cfg);
        write_histogram_csv(tag + "__e2e.csv",
                            histogram(rr.ledger.e2e_ms, cfg.histogram_bins));
        write_histogram_csv(
            tag + "__overhead.csv",
            histogram(rr.ledger.replication_overhead_ms, cfg.histogram_bins));
        write_histogram_csv(
            tag + "__selection.csv",
            histogram(rr.ledger.selection_ms, cfg.histogram_bins));
      }
    }
  };
  if (workers <= 1 || cells.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const std::uint32_t n = std::min<std::uint32_t>(
        workers, static_cast<std::uint32_t>(cells.size()));
    pool.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (!out_dir.empty()) {
    std::ofstream out(out_dir + "/summary.csv");
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/summary.csv");
    out << render_summary_csv(rows);
  }
  return rows;
}

// --- trend checks --------------------------------------------------------------

inline constexpr double kE2eMargin = 0.10;      // distance above others
inline constexpr double kReplicaBand = 0.20;    // latency vs spatial
inline constexpr double kOverheadBand = 0.30;   // pairwise spread

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

struct CellMean {
  double sum = 0;
  std::size_t n = 0;
  double mean() const { return n ? sum / static_cast<double>(n) : 0; }
};

// means[consumers][strategy] over seeds, plus the sorted consumer counts.
struct TrendTable {
  std::vector<std::uint32_t> counts;
  std::map<std::uint32_t, std::array<CellMean, 3>> cells;
  std::string missing;  // diagnostic for absent (strategy, count) cells

  bool complete() const { return missing.empty() && !counts.empty(); }
};

inline TrendTable tabulate(const std::vector<RunRow>& rows,
                           const std::string& scenario,
                           double RunRow::*metric) {
  TrendTable t;
  for (const auto& r : rows) {
    if (r.scenario != scenario) continue;
    auto& cell = t.cells[r.consumers][static_cast<std::size_t>(r.strategy)];
    cell.sum += r.*metric;
    ++cell.n;
  }
  for (const auto& [count, by_strategy] : t.cells) {
    t.counts.push_back(count);
    for (std::size_t s = 0; s < 3; ++s)
      if (by_strategy[s].n == 0) {
        if (!t.missing.empty()) t.missing += ", ";
        t.missing += "(" + std::string(to_string(static_cast<StrategyKind>(s))) +
                     ", " + std::to_string(count) + ")";
      }
  }
  if (t.cells.empty()) t.missing = "no rows for scenario '" + scenario + "'";
  return t;
}

inline double of(const TrendTable& t, std::uint32_t count, StrategyKind s) {
  return t.cells.at(count)[static_cast<std::size_t>(s)].mean();
}

}  // namespace detail

// Mean end-to-end latency: distance above latency and spatial by the margin
// at every consumer count.
inline TrendCheck check_e2e_trend(const std::vector<RunRow>& rows,
                                  const std::string& scenario = "e2e_latency") {
  TrendCheck c{"end_to_end_latency", false, ""};
  const auto t = detail::tabulate(rows, scenario, &RunRow::mean_e2e_ms);
  if (!t.complete()) {
    c.detail = "missing runs: " + t.missing;
    return c;
  }
  c.pass = true;
  std::ostringstream d;
  for (std::uint32_t n : t.counts) {
    const double dist = detail::of(t, n, StrategyKind::distance);
    const double lat = detail::of(t, n, StrategyKind::latency);
    const double spa = detail::of(t, n, StrategyKind::spatial);
    const bool ok = dist >= (1.0 + kE2eMargin) * lat &&
                    dist >= (1.0 + kE2eMargin) * spa;
    if (!ok) c.pass = false;
    d << "c=" << n << " dist/lat=" << (lat > 0 ? dist / lat : 0)
      << " dist/spatial=" << (spa > 0 ? dist / spa : 0) << (ok ? "" : " !") << "; ";
  }
  c.detail = d.str();
  return c;
}

// Mean replicas per producer: distance at or above both, latency and spatial
// within the band (spatial may exceed latency at the largest count).
inline TrendCheck check_replica_trend(const std::vector<RunRow>& rows,
                                      const std::string& scenario = "e2e_latency") {
  TrendCheck c{"replica_count", false, ""};
  const auto t =
      detail::tabulate(rows, scenario, &RunRow::mean_replicas_per_producer);
  if (!t.complete()) {
    c.detail = "missing runs: " + t.missing;
    return c;
  }
  c.pass = true;
  const std::uint32_t largest = t.counts.back();
  std::ostringstream d;
  for (std::uint32_t n : t.counts) {
    const double dist = detail::of(t, n, StrategyKind::distance);
    const double lat = detail::of(t, n, StrategyKind::latency);
    const double spa = detail::of(t, n, StrategyKind::spatial);
    bool ok = dist >= lat && dist >= spa;
    const double band = kReplicaBand * std::max(lat, spa);
    const bool within = std::abs(lat - spa) <= band;
    if (!(within || (n == largest && spa > lat))) ok = false;
    if (!ok) c.pass = false;
    d << "c=" << n << " dist=" << dist << " lat=" << lat << " spatial=" << spa
      << (ok ? "" : " !") << "; ";
  }
  c.detail = d.str();
  return c;
}

// Mean replication overhead: the three strategies within the band of one
// another at every consumer count.
inline TrendCheck check_overhead_trend(const std::vector<RunRow>& rows,
                                       const std::string& scenario = "e2e_latency") {
  TrendCheck c{"replication_overhead", false, ""};
  const auto t = detail::tabulate(rows, scenario,
                                  &RunRow::mean_replication_overhead_ms);
  if (!t.complete()) {
    c.detail = "missing runs: " + t.missing;
    return c;
  }
  c.pass = true;
  std::ostringstream d;
  for (std::uint32_t n : t.counts) {
    const double a = detail::of(t, n, StrategyKind::distance);
    const double b = detail::of(t, n, StrategyKind::latency);
    const double e = detail::of(t, n, StrategyKind::spatial);
    const double hi = std::max({a, b, e});
    const double lo = std::min({a, b, e});
    const bool ok = hi <= 0 || (hi - lo) <= kOverheadBand * hi;
    if (!ok) c.pass = false;
    d << "c=" << n << " spread=" << (hi > 0 ? (hi - lo) / hi : 0)
      << (ok ? "" : " !") << "; ";
  }
  c.detail = d.str();
  return c;
}

// Mean selection time: spatial < latency < distance at every consumer count.
inline TrendCheck check_selection_trend(
    const std::vector<RunRow>& rows,
    const std::string& scenario = "selection_time") {
  TrendCheck c{"selection_time", false, ""};
  const auto t =
      detail::tabulate(rows, scenario, &RunRow::mean_selection_time_ms);
  if (!t.complete()) {
    c.detail = "missing runs: " + t.missing;
    return c;
  }
  c.pass = true;
  std::ostringstream d;
  for (std::uint32_t n : t.counts) {
    const double dist = detail::of(t, n, StrategyKind::distance);
    const double lat = detail::of(t, n, StrategyKind::latency);
    const double spa = detail::of(t, n, StrategyKind::spatial);
    const bool ok = spa < lat && lat < dist;
    if (!ok) c.pass = false;
    d << "c=" << n << " spatial=" << spa << " lat=" << lat << " dist=" << dist
      << (ok ? "" : " !") << "; ";
  }
  c.detail = d.str();
  return c;
}

inline std::vector<TrendCheck> evaluate_trends(const std::vector<RunRow>& rows) {
  return {check_e2e_trend(rows), check_replica_trend(rows),
          check_overhead_trend(rows), check_selection_trend(rows)};
}

}  // namespace edgeplace
