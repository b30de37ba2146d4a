#pragma once

// The Matchmaker's server-selection module: initial load conditioning,
// centroid computation, the distance/latency/spatial placement strategies and
// per-subscription consumer host selection. Selections are serialized; the
// Matchmaker is the single logical decision point of a run.
//
// Decision durations are modeled, not measured: every strategy call counts
// the elementary operations it performs (coordinate math, table lookups,
// sort work, tree steps) and converts them to milliseconds with fixed unit
// costs. Runs therefore replay bit-identically while the reported durations
// preserve the relative expense of the strategies.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edgeplace/constraints.hpp"
#include "edgeplace/model.hpp"
#include "edgeplace/rtree.hpp"

namespace edgeplace {

enum class StrategyKind : std::uint8_t { distance, latency, spatial };

inline const char* to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::distance: return "distance";
    case StrategyKind::latency: return "latency";
    case StrategyKind::spatial: return "spatial";
  }
  return "?";
}

inline StrategyKind parse_strategy(const std::string& name) {
  if (name == "distance") return StrategyKind::distance;
  if (name == "latency") return StrategyKind::latency;
  if (name == "spatial") return StrategyKind::spatial;
  throw std::invalid_argument("unknown strategy '" + name +
                              "' (expected distance|latency|spatial)");
}

enum class DeclineReason : std::uint8_t { no_viable_host, replica_limit };

inline const char* to_string(DeclineReason r) {
  switch (r) {
    case DeclineReason::no_viable_host: return "no viable host";
    case DeclineReason::replica_limit: return "all replicas exhausted";
  }
  return "?";
}

// Unit costs of the elementary operations, in abstract units; one unit is
// unit_ms milliseconds. Coordinate keys cost more than latency-table keys,
// matching the relative arithmetic involved.
struct DecisionCosts {
  double unit_ms = 1e-4;  // ~100ns per elementary operation
  double distance_key = 4.0;
  double latency_key = 2.0;
  double viability = 2.0;
  double tree_node = 2.0;
  double tree_entry = 1.0;
  double centroid_point = 1.0;
};

class CostMeter {
 public:
  void add(double units, std::size_t count = 1) {
    units_ += units * static_cast<double>(count);
  }
  // n log2 n comparison budget of an n-element sort.
  void add_sort(std::size_t n) {
    if (n > 1)
      units_ += static_cast<double>(n) *
                std::ceil(std::log2(static_cast<double>(n)));
  }
  void add_query(const QueryStats& q, const DecisionCosts& c) {
    units_ += static_cast<double>(q.nodes_visited) * c.tree_node +
              static_cast<double>(q.entries_scanned) * c.tree_entry;
  }
  double units() const { return units_; }
  Millis to_ms(double unit_ms) const { return units_ * unit_ms; }

 private:
  double units_ = 0;
};

struct SelectionOutcome {
  std::optional<HostId> host;
  std::optional<DeclineReason> decline;
  Millis decision_ms = 0;  // modeled cost of the whole strategy call

  bool selected() const { return host.has_value(); }
};

// Arithmetic mean of the producer location and the given consumer locations;
// the producer location alone when no consumers exist yet.
inline Location centroid(Location producer,
                         std::span<const Location> consumers) {
  double sx = producer.x, sy = producer.y;
  for (const auto& c : consumers) {
    sx += c.x;
    sy += c.y;
  }
  const double n = 1.0 + static_cast<double>(consumers.size());
  return {sx / n, sy / n};
}

struct MatchmakerConfig {
  StrategyKind strategy = StrategyKind::latency;
  double world_extent = 1000.0;
  double concentric_step = 62.5;
  std::uint32_t rtree_max_children = 40;
  std::uint32_t rtree_min_children = 20;
  DecisionCosts costs{};
};

class Matchmaker {
 public:
  Matchmaker(PlacementState state, LatencyModel latency, MatchmakerConfig config)
      : state_(std::move(state)),
        latency_(std::move(latency)),
        cfg_(config),
        tree_(config.rtree_max_children, config.rtree_min_children) {
    for (const auto& h : state_.hosts()) tree_.insert(h.id, h.location);
  }

  const PlacementState& state() const { return state_; }
  const LatencyModel& latency() const { return latency_; }
  const RTree& tree() const { return tree_; }
  const MatchmakerConfig& config() const { return cfg_; }
  PlacementState release_state() { return std::move(state_); }

  // Initial-phase conditioning: while producers are registering for the first
  // time, hosts accept at most half their producer load. The phase ends once
  // every registered producer had its first placement pass.
  bool initial_phase() const { return initial_phase_; }
  void end_initial_phase() { initial_phase_ = false; }

  // Places `producer` on a host: its own location seeds the search for the
  // first placement, the consumer/producer centroid for replicas. For
  // replicas the requesting consumer's path is granted as part of success.
  SelectionOutcome select_host(ProducerId producer, bool is_replica,
                               std::optional<ConsumerId> consumer = {}) {
    const ProducerRecord& prod = state_.producer(producer);
    if (is_replica && !consumer)
      throw std::invalid_argument("replica selection requires a consumer");
    CostMeter meter;
    if (is_replica &&
        state_.assigned_hosts(producer).size() >= prod.replica_threshold)
      return {std::nullopt, DeclineReason::replica_limit,
              meter.to_ms(cfg_.costs.unit_ms)};

    Location loc = prod.location;
    std::optional<ConsumerId> cons;
    if (is_replica) {
      loc = centroid_of(producer, consumer, &meter);
      cons = consumer;
    }
    std::optional<HostId> host;
    switch (cfg_.strategy) {
      case StrategyKind::distance:
        host = distance_select(loc, producer, cons, meter);
        break;
      case StrategyKind::latency:
        host = latency_select(producer, cons, meter);
        break;
      case StrategyKind::spatial:
        host = spatial_select(loc, producer, cons, meter);
        break;
    }
    if (!host)
      return {std::nullopt, DeclineReason::no_viable_host,
              meter.to_ms(cfg_.costs.unit_ms)};

    if (!state_.is_assigned(producer, *host)) {
      const auto d = assign_producer(state_, producer, *host,
                                     producer_limit(*host));
      if (d != PathDenial::none)
        throw std::logic_error(std::string("selected host failed assignment: ") +
                               to_string(d));
    }
    if (is_replica) {
      const auto d = grant_path(state_, producer, *host, *consumer,
                                producer_limit(*host));
      if (d != PathDenial::none)
        throw std::logic_error(std::string("selected host failed grant: ") +
                               to_string(d));
    }
    return {host, std::nullopt, meter.to_ms(cfg_.costs.unit_ms)};
  }

  struct SubscriptionOutcome {
    enum class Served : std::uint8_t { existing, replica, declined };

    ProducerId producer = 0;
    Served served = Served::declined;
    std::optional<HostId> host;
    std::optional<DeclineReason> decline;
    Millis existing_scan_ms = 0;  // ranking the producer's current hosts
    Millis strategy_ms = 0;       // select_host cost when replication ran
    bool ran_strategy = false;

    Millis total_ms() const { return existing_scan_ms + strategy_ms; }
  };

  // Serves every subscription of `consumer`: the best existing host of the
  // producer with consumer headroom wins, otherwise a replica is created.
  std::vector<SubscriptionOutcome> consumer_host_select(ConsumerId consumer) {
    const ConsumerRecord& cons = state_.consumer(consumer);
    std::vector<SubscriptionOutcome> out;
    out.reserve(cons.subscriptions.size());
    for (ProducerId pid : cons.subscriptions) {
      SubscriptionOutcome so;
      so.producer = pid;
      if (auto existing = state_.path_host(pid, consumer)) {
        so.served = SubscriptionOutcome::Served::existing;
        so.host = existing;
        out.push_back(so);
        continue;
      }
      CostMeter scan;
      const auto& assigned = state_.assigned_hosts(pid);
      std::vector<std::pair<double, HostId>> order;
      order.reserve(assigned.size());
      for (HostId h : assigned) {
        double key;
        if (cfg_.strategy == StrategyKind::distance) {
          key = distance(state_.host(h).location, cons.location);
          scan.add(cfg_.costs.distance_key);
        } else {
          key = latency_.consumer_link(consumer, h);
          scan.add(cfg_.costs.latency_key);
        }
        order.emplace_back(key, h);
      }
      sort_candidates(order, scan);
      std::optional<HostId> pick;
      for (const auto& [key, h] : order) {
        scan.add(cfg_.costs.viability);
        if (can_host_consumer(state_, h, consumer)) {
          pick = h;
          break;
        }
      }
      if (pick) {
        const auto d = grant_path(state_, pid, *pick, consumer);
        if (d != PathDenial::none)
          throw std::logic_error(std::string("existing host failed grant: ") +
                                 to_string(d));
        so.served = SubscriptionOutcome::Served::existing;
        so.host = pick;
        so.existing_scan_ms = scan.to_ms(cfg_.costs.unit_ms);
      } else {
        so.existing_scan_ms = scan.to_ms(cfg_.costs.unit_ms);
        const SelectionOutcome sel = select_host(pid, true, consumer);
        so.ran_strategy = true;
        so.strategy_ms = sel.decision_ms;
        if (sel.selected()) {
          so.served = SubscriptionOutcome::Served::replica;
          so.host = sel.host;
        } else {
          so.served = SubscriptionOutcome::Served::declined;
          so.decline = sel.decline;
        }
      }
      out.push_back(so);
    }
    return out;
  }

  // Centroid of the producer and its currently served consumers, plus the
  // requesting consumer when given.
  Location centroid_of(ProducerId producer, std::optional<ConsumerId> extra,
                       CostMeter* meter = nullptr) const {
    const ProducerRecord& prod = state_.producer(producer);
    std::vector<Location> pts;
    const auto& served = state_.served_consumers(producer);
    pts.reserve(served.size() + 1);
    for (ConsumerId k : served) {
      if (extra && *extra == k) continue;
      pts.push_back(state_.consumer(k).location);
    }
    if (extra) pts.push_back(state_.consumer(*extra).location);
    if (meter) meter->add(cfg_.costs.centroid_point, pts.size() + 1);
    return centroid(prod.location, pts);
  }

  // --- strategy entry points (exposed for unit-level cross-checks) ---------

  // Hosts ranked by Euclidean distance to `loc`, or by the sum of distances
  // to producer and consumer for replicas; ties by ascending id. Latency is
  // never consulted.
  std::optional<HostId> distance_select(Location loc, ProducerId producer,
                                        std::optional<ConsumerId> consumer,
                                        CostMeter& meter) const {
    const auto hosts = state_.hosts();
    std::vector<std::pair<double, HostId>> order;
    order.reserve(hosts.size());
    if (consumer) {
      const Location pl = state_.producer(producer).location;
      const Location cl = state_.consumer(*consumer).location;
      for (const auto& h : hosts)
        order.emplace_back(
            distance(h.location, pl) + distance(h.location, cl), h.id);
      meter.add(cfg_.costs.distance_key * 2, hosts.size());
    } else {
      for (const auto& h : hosts)
        order.emplace_back(distance(h.location, loc), h.id);
      meter.add(cfg_.costs.distance_key, hosts.size());
    }
    sort_candidates(order, meter);
    return first_viable(order, producer, consumer, meter);
  }

  // Hosts ranked by the producer link latency, plus the consumer link for
  // replicas; ties by ascending id. No centroid involvement.
  std::optional<HostId> latency_select(ProducerId producer,
                                       std::optional<ConsumerId> consumer,
                                       CostMeter& meter) const {
    const auto hosts = state_.hosts();
    std::vector<std::pair<double, HostId>> order;
    order.reserve(hosts.size());
    for (const auto& h : hosts)
      order.emplace_back(rank_latency(producer, consumer, h.id), h.id);
    meter.add(cfg_.costs.latency_key * (consumer ? 2 : 1), hosts.size());
    sort_candidates(order, meter);
    return first_viable(order, producer, consumer, meter);
  }

  // Three-phase pruned search around `loc`; candidates of each phase are
  // ranked by latency and the best viable one wins. Ends after the ring
  // whose inner radius passes the world diagonal.
  std::optional<HostId> spatial_select(Location loc, ProducerId producer,
                                       std::optional<ConsumerId> consumer,
                                       CostMeter& meter) const {
    {
      QueryStats q;
      const auto cands = tree_.mbr_nodes(loc, &q);
      meter.add_query(q, cfg_.costs);
      if (auto h = rank_and_pick(cands, producer, consumer, meter)) return h;
    }
    {
      QueryStats q;
      const auto cands = tree_.nearest_mbr_nodes(loc, &q);
      meter.add_query(q, cfg_.costs);
      if (auto h = rank_and_pick(cands, producer, consumer, meter)) return h;
    }
    const double diagonal = cfg_.world_extent * std::numbers::sqrt2;
    const double step = cfg_.concentric_step;
    for (std::uint32_t ring = 1;
         static_cast<double>(ring - 1) * step <= diagonal; ++ring) {
      QueryStats q;
      const auto cands = tree_.concentric_ring(loc, ring, step, &q);
      meter.add_query(q, cfg_.costs);
      if (auto h = rank_and_pick(cands, producer, consumer, meter)) return h;
    }
    return std::nullopt;
  }

  // Feasibility of a candidate under the current phase: producer load and
  // storage always, consumer headroom when a consumer is being bound.
  bool viable(HostId host, ProducerId producer,
              std::optional<ConsumerId> consumer) const {
    if (!can_host_producer(state_, host, producer, producer_limit(host)))
      return false;
    if (consumer && !can_host_consumer(state_, host, *consumer)) return false;
    return true;
  }

 private:
  std::optional<std::uint32_t> producer_limit(HostId host) const {
    if (!initial_phase_) return std::nullopt;
    return initial_producer_threshold(state_.host(host));
  }

  double rank_latency(ProducerId producer, std::optional<ConsumerId> consumer,
                      HostId host) const {
    double key = latency_.producer_link(producer, host);
    if (consumer) key += latency_.consumer_link(*consumer, host);
    return key;
  }

  void sort_candidates(std::vector<std::pair<double, HostId>>& order,
                       CostMeter& meter) const {
    meter.add_sort(order.size());
    std::sort(order.begin(), order.end());
  }

  std::optional<HostId> first_viable(
      const std::vector<std::pair<double, HostId>>& order, ProducerId producer,
      std::optional<ConsumerId> consumer, CostMeter& meter) const {
    for (const auto& [key, h] : order) {
      meter.add(cfg_.costs.viability);
      if (viable(h, producer, consumer)) return h;
    }
    return std::nullopt;
  }

  std::optional<HostId> rank_and_pick(const std::vector<HostId>& candidates,
                                      ProducerId producer,
                                      std::optional<ConsumerId> consumer,
                                      CostMeter& meter) const {
    if (candidates.empty()) return std::nullopt;
    std::vector<std::pair<double, HostId>> order;
    order.reserve(candidates.size());
    for (HostId h : candidates)
      order.emplace_back(rank_latency(producer, consumer, h), h);
    meter.add(cfg_.costs.latency_key * (consumer ? 2 : 1), candidates.size());
    sort_candidates(order, meter);
    return first_viable(order, producer, consumer, meter);
  }

  PlacementState state_;
  LatencyModel latency_;
  MatchmakerConfig cfg_;
  RTree tree_;
  bool initial_phase_ = true;
};

}  // namespace edgeplace
