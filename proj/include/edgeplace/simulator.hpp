#pragma once

// Deterministic discrete-event engine over the tiered-host workload:
// producer registrations under initial load conditioning, Poisson consumer
// arrivals driving per-subscription host selection, chunked transfers costed
// per link, and the metrics ledger the experiments report on. A run is fully
// reproducible from its configuration; transfers advance simulated time while
// selection durations come from the modeled decision costs.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeplace/model.hpp"
#include "edgeplace/rng.hpp"
#include "edgeplace/strategies.hpp"

namespace edgeplace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventKind : std::uint8_t {
  producer_register,
  consumer_arrive,
  chunk_delivered,
  replica_established,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::producer_register: return "producer_register";
    case EventKind::consumer_arrive: return "consumer_arrive";
    case EventKind::chunk_delivered: return "chunk_delivered";
    case EventKind::replica_established: return "replica_established";
  }
  return "?";
}

struct Event {
  Millis time = 0;
  std::uint64_t seq = 0;  // tie-break: insertion order
  EventKind kind = EventKind::producer_register;
  ProducerId producer = 0;
  HostId host = 0;
  ConsumerId consumer = 0;
  std::uint64_t chunk_index = 0;  // chunk events: 1 or chunk_count
  std::uint64_t chunk_count = 0;
};

struct Range {
  double lo = 0;
  double hi = 0;
};

struct IntRange {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
};

struct ByteRange {
  Bytes lo = 0;
  Bytes hi = 0;
};

struct TierProfile {
  double fraction = 1.0 / 3.0;
  Range latency_ms;      // per-chunk link latency band
  ByteRange capacity;    // storage band
  IntRange total_load;   // producer+consumer connection budget
};

// count == 0 means uniform placement over the world square.
struct ClusterSpec {
  std::uint32_t count = 0;
  double sigma = 0;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::uint32_t hosts = 50;
  std::uint32_t producers = 100;
  std::uint32_t consumers = 200;
  StrategyKind strategy = StrategyKind::latency;
  std::uint64_t seed = 1;
  double world_extent = 1000.0;

  // Capacity and load both scale against latency: the low-latency tier is
  // the high-capacity, high-load one.
  TierProfile tier_high{1.0 / 3, {5, 10}, {678 * kGiB, kTiB}, {67, 80}};
  TierProfile tier_medium{1.0 / 3, {10, 15}, {355 * kGiB, 678 * kGiB}, {54, 66}};
  TierProfile tier_low{1.0 / 3, {15, 20}, {32 * kGiB, 355 * kGiB}, {40, 53}};
  double producer_load_fraction = 1.0 / 3;

  ByteRange data_size{kGiB, 32 * kGiB};
  Bytes chunk_bytes = 1024;
  double consumer_mean_interarrival_ms = 5.0;
  std::uint32_t subscriptions_per_consumer = 1;
  std::uint32_t replica_threshold = 0;  // 0 = unbounded
  Millis jitter_ms = 0;
  std::uint32_t rtree_max_children = 40;
  std::uint32_t rtree_min_children = 20;
  double concentric_step = 0;  // 0 -> world_extent / 16
  ClusterSpec clusters{};
  std::uint32_t histogram_bins = 20;
  std::string locations_csv;  // optional id,x,y file, rows consumed hosts,
                              // then producers, then consumers

  double effective_step() const {
    return concentric_step > 0 ? concentric_step : world_extent / 16.0;
  }

  std::array<const TierProfile*, 3> tiers() const {
    return {&tier_high, &tier_medium, &tier_low};
  }

  void validate() const {
    const auto need = [](bool ok, const std::string& field, const std::string& why) {
      if (!ok) throw ConfigError("config field '" + field + "': " + why);
    };
    need(hosts >= 1, "hosts", "at least one host required");
    need(producers >= 1, "producers", "at least one producer required");
    need(world_extent > 0, "world_extent", "must be positive");
    const double fsum =
        tier_high.fraction + tier_medium.fraction + tier_low.fraction;
    need(std::abs(fsum - 1.0) < 1e-9, "tier_fractions", "must sum to 1");
    const char* tier_names[3] = {"tier_high", "tier_medium", "tier_low"};
    const auto ts = tiers();
    for (int i = 0; i < 3; ++i) {
      const auto& t = *ts[i];
      const std::string base = tier_names[i];
      need(t.fraction >= 0, base + ".fraction", "must be non-negative");
      need(t.latency_ms.lo >= 0 && t.latency_ms.lo <= t.latency_ms.hi,
           base + ".latency_ms", "range must be non-empty and non-negative");
      need(t.capacity.lo > 0 && t.capacity.lo <= t.capacity.hi,
           base + ".capacity", "range must be non-empty and positive");
      need(t.total_load.lo >= 2 && t.total_load.lo <= t.total_load.hi,
           base + ".total_load", "range must be non-empty with load >= 2");
    }
    need(producer_load_fraction > 0 && producer_load_fraction < 1,
         "producer_load_fraction", "must lie in (0, 1)");
    for (const auto* t : ts) {
      const auto plt = static_cast<std::uint32_t>(
          static_cast<double>(t->total_load.lo) * producer_load_fraction);
      need(plt >= 1, "producer_load_fraction",
           "minimum total load yields no producer slots");
    }
    need(data_size.lo > 0 && data_size.lo <= data_size.hi, "data_size",
         "range must be non-empty and positive");
    need(chunk_bytes > 0, "chunk_bytes", "must be positive");
    need(consumer_mean_interarrival_ms > 0, "consumer_mean_interarrival_ms",
         "must be positive");
    need(subscriptions_per_consumer >= 1 &&
             subscriptions_per_consumer <= producers,
         "subscriptions_per_consumer", "must lie in [1, producers]");
    need(jitter_ms >= 0, "jitter_ms", "must be non-negative");
    need(rtree_max_children >= 2 && rtree_min_children >= 1 &&
             2 * rtree_min_children <= rtree_max_children + 1,
         "rtree", "fan-out must satisfy 1 <= m and 2m <= M+1");
    need(concentric_step >= 0, "concentric_step", "must be non-negative");
    if (clusters.count > 0)
      need(clusters.sigma > 0, "clusters.sigma",
           "must be positive when clusters are enabled");
    need(histogram_bins >= 1, "histogram_bins", "at least one bin");
  }
};

struct FleetBundle {
  std::vector<HostRecord> hosts;
  std::vector<ProducerRecord> producers;
  std::vector<ConsumerRecord> consumers;
  std::vector<Millis> consumer_arrivals;  // consumers[i] arrives at [i]
};

namespace detail {

inline std::vector<Location> load_locations_csv(const std::string& path,
                                                std::size_t needed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config field 'locations_csv': cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("config field 'locations_csv': empty file " + path);
  // header: id,x,y
  std::vector<Location> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, xs, ys;
    if (!std::getline(row, id, ',') || !std::getline(row, xs, ',') ||
        !std::getline(row, ys, ','))
      throw ConfigError("config field 'locations_csv': malformed row " +
                        std::to_string(lineno));
    try {
      out.push_back({std::stod(xs), std::stod(ys)});
    } catch (const std::exception&) {
      throw ConfigError("config field 'locations_csv': bad coordinates at row " +
                        std::to_string(lineno));
    }
  }
  if (out.size() < needed)
    throw ConfigError("config field 'locations_csv': " + std::to_string(needed) +
                      " locations needed, file has " + std::to_string(out.size()));
  return out;
}

// Location source shared by hosts, producers and consumers: CSV rows,
// clustered stand-in, or uniform.
class LocationSampler {
 public:
  LocationSampler(const ScenarioConfig& cfg, std::mt19937_64& rng)
      : cfg_(cfg), rng_(rng) {
    if (!cfg.locations_csv.empty()) {
      const std::size_t needed =
          std::size_t{cfg.hosts} + cfg.producers + cfg.consumers;
      file_ = load_locations_csv(cfg.locations_csv, needed);
      return;
    }
    if (cfg.clusters.count > 0) {
      std::uniform_real_distribution<double> u(0.0, cfg.world_extent);
      centers_.reserve(cfg.clusters.count);
      for (std::uint32_t i = 0; i < cfg.clusters.count; ++i)
        centers_.push_back({u(rng_), u(rng_)});
    }
  }

  Location next() {
    if (!file_.empty()) {
      if (cursor_ >= file_.size())
        throw ConfigError("config field 'locations_csv': ran out of rows");
      return file_[cursor_++];
    }
    if (!centers_.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, centers_.size() - 1);
      std::normal_distribution<double> gauss(0.0, cfg_.clusters.sigma);
      const Location c = centers_[pick(rng_)];
      const double x = std::clamp(c.x + gauss(rng_), 0.0, cfg_.world_extent);
      const double y = std::clamp(c.y + gauss(rng_), 0.0, cfg_.world_extent);
      return {x, y};
    }
    std::uniform_real_distribution<double> u(0.0, cfg_.world_extent);
    const double x = u(rng_);
    const double y = u(rng_);
    return {x, y};
  }

 private:
  const ScenarioConfig& cfg_;
  std::mt19937_64& rng_;
  std::vector<Location> centers_;
  std::vector<Location> file_;
  std::size_t cursor_ = 0;
};

}  // namespace detail

// Tier counts by largest-share-first remainder assignment: floor every share,
// hand leftovers to high, then medium, then low.
inline std::array<std::uint32_t, 3> tier_counts(const ScenarioConfig& cfg) {
  const auto ts = cfg.tiers();
  std::array<std::uint32_t, 3> counts{};
  std::uint32_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    counts[i] = static_cast<std::uint32_t>(
        static_cast<double>(cfg.hosts) * ts[i]->fraction);
    assigned += counts[i];
  }
  for (int i = 0; assigned < cfg.hosts; i = (i + 1) % 3) {
    ++counts[i];
    ++assigned;
  }
  return counts;
}

inline FleetBundle generate_fleet(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 fleet_rng(substream_seed(cfg.seed, "fleet"));
  std::mt19937_64 arrivals_rng(substream_seed(cfg.seed, "arrivals"));
  std::mt19937_64 subs_rng(substream_seed(cfg.seed, "subscriptions"));

  FleetBundle out;
  detail::LocationSampler locations(cfg, fleet_rng);

  const auto counts = tier_counts(cfg);
  const auto ts = cfg.tiers();
  static constexpr Tier kTierOf[3] = {Tier::high, Tier::medium, Tier::low};

  HostId hid = 0;
  for (int t = 0; t < 3; ++t) {
    const TierProfile& tier = *ts[t];
    std::uniform_real_distribution<double> lat(tier.latency_ms.lo,
                                               tier.latency_ms.hi);
    std::uniform_int_distribution<Bytes> cap(tier.capacity.lo,
                                             tier.capacity.hi);
    std::uniform_int_distribution<std::uint32_t> load(tier.total_load.lo,
                                                      tier.total_load.hi);
    for (std::uint32_t i = 0; i < counts[t]; ++i, ++hid) {
      HostRecord h;
      h.id = hid;
      h.location = locations.next();
      h.base_latency = lat(fleet_rng);
      h.capacity = cap(fleet_rng);
      const std::uint32_t total = load(fleet_rng);
      h.producer_load_threshold = static_cast<std::uint32_t>(
          static_cast<double>(total) * cfg.producer_load_fraction);
      h.consumer_load_threshold = total - h.producer_load_threshold;
      h.tier = kTierOf[t];
      out.hosts.push_back(h);
    }
  }

  std::uniform_int_distribution<Bytes> data(cfg.data_size.lo, cfg.data_size.hi);
  for (std::uint32_t i = 0; i < cfg.producers; ++i) {
    ProducerRecord p;
    p.id = i;
    p.location = locations.next();
    p.data_size = data(fleet_rng);
    p.replica_threshold =
        cfg.replica_threshold == 0 ? kUnboundedReplicas : cfg.replica_threshold;
    out.producers.push_back(p);
  }

  // Subscriptions: uniform distinct producers per consumer via a partial
  // Fisher-Yates over the producer index pool.
  std::vector<ProducerId> pool(cfg.producers);
  for (std::uint32_t i = 0; i < cfg.producers; ++i) pool[i] = i;
  std::exponential_distribution<double> gap(1.0 /
                                            cfg.consumer_mean_interarrival_ms);
  Millis clock = 0;
  for (std::uint32_t k = 0; k < cfg.consumers; ++k) {
    ConsumerRecord c;
    c.id = k;
    c.location = locations.next();
    for (std::uint32_t s = 0; s < cfg.subscriptions_per_consumer; ++s) {
      std::uniform_int_distribution<std::uint32_t> pick(
          s, cfg.producers - 1);
      std::swap(pool[s], pool[pick(subs_rng)]);
      c.subscriptions.push_back(pool[s]);
    }
    out.consumers.push_back(std::move(c));
    clock += gap(arrivals_rng);
    out.consumer_arrivals.push_back(clock);
  }
  return out;
}

struct MetricsLedger {
  std::vector<Millis> e2e_ms;                   // per granted path
  std::vector<Millis> replication_overhead_ms;  // per granted subscription
  std::vector<Millis> selection_ms;             // per placement-strategy call
  std::vector<std::uint32_t> replicas_per_producer;  // final hosting counts

  std::uint32_t served_existing = 0;
  std::uint32_t served_replica = 0;
  std::uint32_t declined_subscriptions = 0;
  std::uint32_t declined_initial = 0;
  std::uint64_t chunks_delivered = 0;
  std::uint32_t replica_events = 0;  // hosting assignments logged

  static double mean(const std::vector<Millis>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }

  double mean_e2e() const { return mean(e2e_ms); }
  double mean_overhead() const { return mean(replication_overhead_ms); }
  double mean_selection() const { return mean(selection_ms); }
  double mean_replicas() const {
    if (replicas_per_producer.empty()) return 0;
    double s = 0;
    for (auto r : replicas_per_producer) s += r;
    return s / static_cast<double>(replicas_per_producer.size());
  }
};

struct RunResult {
  MetricsLedger ledger;
  std::vector<Event> log;  // events in processing order
  PlacementState state;    // final placement
  LatencyModel latency;
};

inline RunResult run(const ScenarioConfig& cfg, FleetBundle fleet) {
  LatencyModel latency(fleet.hosts, cfg.jitter_ms,
                       substream_seed(cfg.seed, "jitter"));
  PlacementState state(fleet.hosts, fleet.producers, fleet.consumers,
                       cfg.chunk_bytes);
  MatchmakerConfig mc;
  mc.strategy = cfg.strategy;
  mc.world_extent = cfg.world_extent;
  mc.concentric_step = cfg.effective_step();
  mc.rtree_max_children = cfg.rtree_max_children;
  mc.rtree_min_children = cfg.rtree_min_children;
  Matchmaker mm(std::move(state), latency, mc);

  struct Cmp {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Cmp> queue;
  std::uint64_t seq = 0;
  const auto push = [&](Event ev) {
    ev.seq = seq++;
    queue.push(ev);
  };

  for (const auto& p : fleet.producers) {
    Event ev;
    ev.kind = EventKind::producer_register;
    ev.time = 0;
    ev.producer = p.id;
    push(ev);
  }
  for (std::size_t k = 0; k < fleet.consumers.size(); ++k) {
    Event ev;
    ev.kind = EventKind::consumer_arrive;
    ev.time = fleet.consumer_arrivals[k];
    ev.consumer = fleet.consumers[k].id;
    push(ev);
  }

  MetricsLedger ledger;
  std::vector<Event> log;
  log.reserve(fleet.producers.size() + 4 * fleet.consumers.size());

  while (!queue.empty()) {
    const Event ev = queue.top();
    queue.pop();
    log.push_back(ev);
    switch (ev.kind) {
      case EventKind::producer_register: {
        const auto so = mm.select_host(ev.producer, false);
        ledger.selection_ms.push_back(so.decision_ms);
        if (so.selected()) {
          Event rep;
          rep.kind = EventKind::replica_established;
          rep.time = ev.time;
          rep.producer = ev.producer;
          rep.host = *so.host;
          push(rep);
        } else {
          ++ledger.declined_initial;
        }
        break;
      }
      case EventKind::consumer_arrive: {
        if (mm.initial_phase()) mm.end_initial_phase();
        for (const auto& so : mm.consumer_host_select(ev.consumer)) {
          if (so.ran_strategy) ledger.selection_ms.push_back(so.strategy_ms);
          using Served = Matchmaker::SubscriptionOutcome::Served;
          if (so.served == Served::declined) {
            ++ledger.declined_subscriptions;
            continue;
          }
          const HostId j = *so.host;
          const bool is_replica = so.served == Served::replica;
          if (is_replica)
            ++ledger.served_replica;
          else
            ++ledger.served_existing;

          const ProducerRecord& prod = mm.state().producer(so.producer);
          const Millis link_p = mm.latency().producer_link(so.producer, j);
          const Millis link_c = mm.latency().consumer_link(ev.consumer, j);
          // First chunk: straight from host storage for an established
          // placement, via the producer for a fresh replica.
          const Millis first_chunk = is_replica ? link_p + link_c : link_c;
          const std::uint64_t chunks =
              chunk_count(prod.data_size, cfg.chunk_bytes);
          const Millis total = (link_p + link_c) * static_cast<Millis>(chunks);

          ledger.replication_overhead_ms.push_back(so.total_ms() + first_chunk);
          ledger.e2e_ms.push_back(total);

          Event first;
          first.kind = EventKind::chunk_delivered;
          first.time = ev.time + first_chunk;
          first.producer = so.producer;
          first.host = j;
          first.consumer = ev.consumer;
          first.chunk_index = 1;
          first.chunk_count = chunks;
          push(first);
          if (chunks > 1) {
            Event last = first;
            last.time = ev.time + total;
            last.chunk_index = chunks;
            push(last);
          }
          if (is_replica) {
            Event rep;
            rep.kind = EventKind::replica_established;
            rep.time = ev.time;
            rep.producer = so.producer;
            rep.host = j;
            rep.consumer = ev.consumer;
            push(rep);
          }
        }
        break;
      }
      case EventKind::chunk_delivered:
        if (ev.chunk_index == ev.chunk_count)
          ledger.chunks_delivered += ev.chunk_count;
        break;
      case EventKind::replica_established:
        ++ledger.replica_events;
        break;
    }
  }

  for (const auto& p : fleet.producers)
    ledger.replicas_per_producer.push_back(
        static_cast<std::uint32_t>(mm.state().assigned_hosts(p.id).size()));

  RunResult result;
  result.ledger = std::move(ledger);
  result.log = std::move(log);
  result.state = mm.release_state();
  result.latency = latency;
  return result;
}

inline RunResult run(const ScenarioConfig& cfg) {
  return run(cfg, generate_fleet(cfg));
}

struct HistogramBin {
  double lo = 0;
  double hi = 0;
  std::uint64_t count = 0;
};

inline std::vector<HistogramBin> histogram(std::span<const Millis> samples,
                                           std::uint32_t bins) {
  std::vector<HistogramBin> out;
  if (samples.empty() || bins == 0) return out;
  double lo = samples[0], hi = samples[0];
  for (double s : samples) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (lo == hi) {
    out.push_back({lo, hi, samples.size()});
    return out;
  }
  const double width = (hi - lo) / bins;
  out.resize(bins);
  for (std::uint32_t b = 0; b < bins; ++b)
    out[b] = {lo + b * width, lo + (b + 1) * width, 0};
  out.back().hi = hi;
  for (double s : samples) {
    auto b = static_cast<std::size_t>((s - lo) / width);
    if (b >= out.size()) b = out.size() - 1;  // top edge is inclusive
    ++out[b].count;
  }
  return out;
}

struct MetricSummary {
  double mean = 0;
  std::size_t count = 0;
  std::vector<HistogramBin> hist;
};

struct RunSummary {
  MetricSummary e2e;
  MetricSummary overhead;
  MetricSummary selection;
  double mean_replicas_per_producer = 0;
  std::uint32_t declines = 0;  // consumer subscriptions declined
  std::uint32_t served_existing = 0;
  std::uint32_t served_replica = 0;
  std::uint32_t declined_initial = 0;
};

inline RunSummary summarize(const MetricsLedger& ledger, std::uint32_t bins) {
  RunSummary s;
  s.e2e = {ledger.mean_e2e(), ledger.e2e_ms.size(),
           histogram(ledger.e2e_ms, bins)};
  s.overhead = {ledger.mean_overhead(), ledger.replication_overhead_ms.size(),
                histogram(ledger.replication_overhead_ms, bins)};
  s.selection = {ledger.mean_selection(), ledger.selection_ms.size(),
                 histogram(ledger.selection_ms, bins)};
  s.mean_replicas_per_producer = ledger.mean_replicas();
  s.declines = ledger.declined_subscriptions;
  s.served_existing = ledger.served_existing;
  s.served_replica = ledger.served_replica;
  s.declined_initial = ledger.declined_initial;
  return s;
}

}  // namespace edgeplace
