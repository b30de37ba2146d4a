#pragma once

// Domain records shared by every module: actors, locations, the per-link
// latency table, and the placement state (delivery paths plus per-host
// occupancy). The placement state is the single source of truth for
// feasibility; it can only be mutated through the checked operations in
// constraints.hpp.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "edgeplace/rng.hpp"

namespace edgeplace {

using ProducerId = std::uint32_t;
using HostId = std::uint32_t;
using ConsumerId = std::uint32_t;
using Bytes = std::uint64_t;
using Millis = double;

inline constexpr Bytes kKiB = 1024;
inline constexpr Bytes kGiB = Bytes{1} << 30;
inline constexpr Bytes kTiB = Bytes{1} << 40;
inline constexpr std::uint32_t kUnboundedReplicas = 0xffffffffu;

struct Location {
  double x = 0;
  double y = 0;
};

inline double distance(Location a, Location b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

enum class Tier : std::uint8_t { high, medium, low };

inline const char* to_string(Tier t) {
  switch (t) {
    case Tier::high: return "high";
    case Tier::medium: return "medium";
    case Tier::low: return "low";
  }
  return "?";
}

struct ProducerRecord {
  ProducerId id = 0;
  Location location;
  Bytes data_size = 0;  // bytes the producer streams to each assigned host
  std::uint32_t replica_threshold = kUnboundedReplicas;
};

struct HostRecord {
  HostId id = 0;
  Location location;
  Bytes capacity = 0;
  std::uint32_t producer_load_threshold = 1;  // concurrent producer connections
  std::uint32_t consumer_load_threshold = 1;  // concurrent consumer connections
  Millis base_latency = 0;                    // per-chunk link latency
  Tier tier = Tier::medium;
};

struct ConsumerRecord {
  ConsumerId id = 0;
  Location location;
  std::vector<ProducerId> subscriptions;  // non-empty; every entry registered
};

struct PathTriple {
  ProducerId producer = 0;
  HostId host = 0;
  ConsumerId consumer = 0;
};

// Number of transfer units needed for `data_size`; a partial chunk costs a
// full transfer.
inline std::uint64_t chunk_count(Bytes data_size, Bytes chunk_size) {
  return (data_size + chunk_size - 1) / chunk_size;
}

// Per-link latency table held by the Matchmaker's network module. Both ends
// of a path take the host's base latency; optional zero-mean jitter decorates
// each (endpoint, host) link deterministically from the seed.
class LatencyModel {
 public:
  LatencyModel() = default;
  LatencyModel(std::span<const HostRecord> hosts, Millis jitter_ms = 0.0,
               std::uint64_t seed = 0)
      : jitter_ms_(jitter_ms), seed_(seed) {
    base_.reserve(hosts.size());
    for (const auto& h : hosts) base_.emplace(h.id, h.base_latency);
  }

  Millis base(HostId host) const {
    auto it = base_.find(host);
    if (it == base_.end())
      throw std::out_of_range("unknown host id " + std::to_string(host));
    return it->second;
  }

  Millis producer_link(ProducerId producer, HostId host) const {
    return link(0x70, producer, host);
  }

  Millis consumer_link(ConsumerId consumer, HostId host) const {
    return link(0x63, consumer, host);
  }

  Millis jitter_amplitude() const { return jitter_ms_; }

 private:
  Millis link(std::uint64_t tag, std::uint32_t endpoint, HostId host) const {
    Millis lat = base(host);
    if (jitter_ms_ > 0) {
      std::uint64_t s = seed_ ^ (tag << 56) ^
                        (static_cast<std::uint64_t>(endpoint) << 32) ^ host;
      const double u = unit_interval(splitmix64(s));
      lat += jitter_ms_ * (2.0 * u - 1.0);
    }
    return lat < 0 ? 0 : lat;
  }

  std::unordered_map<HostId, Millis> base_;
  Millis jitter_ms_ = 0;
  std::uint64_t seed_ = 0;
};

class PlacementState;
enum class PathDenial : std::uint8_t;
PathDenial assign_producer(PlacementState&, ProducerId, HostId,
                           std::optional<std::uint32_t>);
PathDenial grant_path(PlacementState&, ProducerId, HostId, ConsumerId,
                      std::optional<std::uint32_t>);

// Sparse path matrix plus per-host occupancy. A producer occupies a host's
// storage and a producer-load slot from the moment it is assigned there,
// whether or not a consumer is connected yet; consumer-load slots are
// occupied per distinct consumer with a delivery path through the host.
class PlacementState {
 public:
  PlacementState() = default;

  PlacementState(std::vector<HostRecord> hosts,
                 std::vector<ProducerRecord> producers,
                 std::vector<ConsumerRecord> consumers, Bytes chunk_size)
      : hosts_(std::move(hosts)),
        producers_(std::move(producers)),
        consumers_(std::move(consumers)),
        chunk_size_(chunk_size) {
    if (chunk_size_ == 0)
      throw std::invalid_argument("chunk_size must be positive");
    host_index_.reserve(hosts_.size());
    producer_index_.reserve(producers_.size());
    consumer_index_.reserve(consumers_.size());
    for (std::size_t i = 0; i < hosts_.size(); ++i) {
      if (hosts_[i].capacity == 0)
        throw std::invalid_argument("host capacity must be positive");
      if (!host_index_.emplace(hosts_[i].id, i).second)
        throw std::invalid_argument("duplicate host id " +
                                    std::to_string(hosts_[i].id));
    }
    for (std::size_t i = 0; i < producers_.size(); ++i) {
      if (producers_[i].data_size == 0)
        throw std::invalid_argument("producer data_size must be positive");
      if (producers_[i].replica_threshold < 1)
        throw std::invalid_argument("replica_threshold must be >= 1");
      if (!producer_index_.emplace(producers_[i].id, i).second)
        throw std::invalid_argument("duplicate producer id " +
                                    std::to_string(producers_[i].id));
    }
    for (std::size_t i = 0; i < consumers_.size(); ++i) {
      if (!consumer_index_.emplace(consumers_[i].id, i).second)
        throw std::invalid_argument("duplicate consumer id " +
                                    std::to_string(consumers_[i].id));
    }
    subscription_sets_.resize(consumers_.size());
    for (std::size_t i = 0; i < consumers_.size(); ++i) {
      const auto& c = consumers_[i];
      if (c.subscriptions.empty())
        throw std::invalid_argument("consumer " + std::to_string(c.id) +
                                    " has no subscriptions");
      for (ProducerId p : c.subscriptions) {
        producer_index_at(p);  // must be registered
        subscription_sets_[i].insert(p);
      }
    }
    host_occ_.resize(hosts_.size());
    producer_occ_.resize(producers_.size());
  }

  // --- registry -----------------------------------------------------------
  std::span<const HostRecord> hosts() const { return hosts_; }
  std::span<const ProducerRecord> producers() const { return producers_; }
  std::span<const ConsumerRecord> consumers() const { return consumers_; }

  const HostRecord& host(HostId id) const { return hosts_[host_index_at(id)]; }
  const ProducerRecord& producer(ProducerId id) const {
    return producers_[producer_index_at(id)];
  }
  const ConsumerRecord& consumer(ConsumerId id) const {
    return consumers_[consumer_index_at(id)];
  }

  Bytes chunk_size() const { return chunk_size_; }

  bool subscribes(ConsumerId consumer, ProducerId producer) const {
    return subscription_sets_[consumer_index_at(consumer)].count(producer) > 0;
  }

  // --- occupancy ----------------------------------------------------------
  std::uint32_t active_producers(HostId id) const {
    return static_cast<std::uint32_t>(host_occ_[host_index_at(id)].assigned.size());
  }

  std::uint32_t active_consumers(HostId id) const {
    return static_cast<std::uint32_t>(host_occ_[host_index_at(id)].consumers.size());
  }

  Bytes used_storage(HostId id) const {
    return host_occ_[host_index_at(id)].used;
  }

  std::span<const ProducerId> assigned_producers(HostId id) const {
    return host_occ_[host_index_at(id)].assigned;
  }

  bool has_consumer(HostId host, ConsumerId consumer) const {
    return host_occ_[host_index_at(host)].consumers.count(consumer) > 0;
  }

  bool is_assigned(ProducerId producer, HostId host) const {
    const auto& hosts_of = producer_occ_[producer_index_at(producer)].hosts;
    for (HostId h : hosts_of)
      if (h == host) return true;
    return false;
  }

  // Hosting assignments of a producer, in assignment order.
  const std::vector<HostId>& assigned_hosts(ProducerId producer) const {
    return producer_occ_[producer_index_at(producer)].hosts;
  }

  // Distinct consumers served for a producer, in grant order.
  const std::vector<ConsumerId>& served_consumers(ProducerId producer) const {
    return producer_occ_[producer_index_at(producer)].consumers;
  }

  std::optional<HostId> path_host(ProducerId producer, ConsumerId consumer) const {
    producer_index_at(producer);
    consumer_index_at(consumer);
    auto it = pair_host_.find(pair_key(producer, consumer));
    if (it == pair_host_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<PathTriple>& paths() const { return paths_; }

  // Total number of (producer, host) hosting pairs.
  std::size_t assignment_count() const { return assignment_count_; }

 private:
  struct HostOcc {
    std::vector<ProducerId> assigned;          // distinct producers stored here
    std::unordered_set<ConsumerId> consumers;  // distinct consumers with a path
    Bytes used = 0;
  };

  struct ProducerOcc {
    std::vector<HostId> hosts;             // assignment order
    std::vector<ConsumerId> consumers;     // grant order, distinct
    std::unordered_set<ConsumerId> consumer_set;
  };

  static std::uint64_t pair_key(ProducerId p, ConsumerId c) {
    return (static_cast<std::uint64_t>(p) << 32) | c;
  }

  std::size_t host_index_at(HostId id) const {
    auto it = host_index_.find(id);
    if (it == host_index_.end())
      throw std::out_of_range("unknown host id " + std::to_string(id));
    return it->second;
  }
  std::size_t producer_index_at(ProducerId id) const {
    auto it = producer_index_.find(id);
    if (it == producer_index_.end())
      throw std::out_of_range("unknown producer id " + std::to_string(id));
    return it->second;
  }
  std::size_t consumer_index_at(ConsumerId id) const {
    auto it = consumer_index_.find(id);
    if (it == consumer_index_.end())
      throw std::out_of_range("unknown consumer id " + std::to_string(id));
    return it->second;
  }

  friend PathDenial assign_producer(PlacementState&, ProducerId, HostId,
                                    std::optional<std::uint32_t>);
  friend PathDenial grant_path(PlacementState&, ProducerId, HostId, ConsumerId,
                               std::optional<std::uint32_t>);

  std::vector<HostRecord> hosts_;
  std::vector<ProducerRecord> producers_;
  std::vector<ConsumerRecord> consumers_;
  std::unordered_map<HostId, std::size_t> host_index_;
  std::unordered_map<ProducerId, std::size_t> producer_index_;
  std::unordered_map<ConsumerId, std::size_t> consumer_index_;
  std::vector<std::unordered_set<ProducerId>> subscription_sets_;
  std::vector<HostOcc> host_occ_;
  std::vector<ProducerOcc> producer_occ_;
  std::vector<PathTriple> paths_;
  std::unordered_map<std::uint64_t, HostId> pair_host_;
  std::size_t assignment_count_ = 0;
  Bytes chunk_size_ = 1024;
};

// Total latency of streaming all chunks producer -> host -> consumer.
inline Millis path_latency(const ProducerRecord& producer, const HostRecord& host,
                           const ConsumerRecord& consumer,
                           const LatencyModel& latency, Bytes chunk_size) {
  if (chunk_size == 0)
    throw std::invalid_argument("chunk_size must be positive");
  const Millis per_chunk = latency.producer_link(producer.id, host.id) +
                           latency.consumer_link(consumer.id, host.id);
  return per_chunk *
         static_cast<Millis>(chunk_count(producer.data_size, chunk_size));
}

// Mean path latency over all present delivery paths; 0 for an empty state.
inline Millis objective_value(const PlacementState& state,
                              const LatencyModel& latency) {
  const auto& ps = state.paths();
  if (ps.empty()) return 0.0;
  Millis total = 0;
  for (const auto& t : ps)
    total += path_latency(state.producer(t.producer), state.host(t.host),
                          state.consumer(t.consumer), latency,
                          state.chunk_size());
  return total / static_cast<Millis>(ps.size());
}

}  // namespace edgeplace
