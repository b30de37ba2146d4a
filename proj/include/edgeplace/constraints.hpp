#pragma once

// Feasibility oracle over the placement state: load, storage, single-path
// and on-demand constraints. All mutation of PlacementState funnels through
// assign_producer / grant_path so the state can never leave the feasible
// region. Denials are typed outcomes, not exceptions, because declined
// requests are observable in the metrics.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgeplace/model.hpp"

namespace edgeplace {

enum class PathDenial : std::uint8_t {
  none,
  producer_load,   // host at its producer connection threshold
  consumer_load,   // host at its consumer connection threshold
  storage,         // producer data does not fit the remaining capacity
  single_path,     // the pair is already served through some host
  not_subscribed,  // consumer does not subscribe to the producer
};

inline const char* to_string(PathDenial d) {
  switch (d) {
    case PathDenial::none: return "granted";
    case PathDenial::producer_load: return "producer load threshold reached";
    case PathDenial::consumer_load: return "consumer load threshold reached";
    case PathDenial::storage: return "storage capacity exhausted";
    case PathDenial::single_path: return "pair already has a delivery path";
    case PathDenial::not_subscribed: return "consumer not subscribed";
  }
  return "?";
}

// Producer threshold applied while first-time placements are conditioned:
// at most half the host's producer load.
inline std::uint32_t initial_producer_threshold(const HostRecord& host) {
  return host.producer_load_threshold / 2;
}

// Why `producer` could not be stored on `host`, or none. A producer already
// resident consumes no extra slot or storage. `producer_limit` substitutes
// the host's threshold during the initial conditioning phase.
inline PathDenial producer_denial(const PlacementState& state, HostId host,
                                  ProducerId producer,
                                  std::optional<std::uint32_t> producer_limit = {}) {
  const HostRecord& h = state.host(host);
  const ProducerRecord& p = state.producer(producer);
  if (state.is_assigned(producer, host)) return PathDenial::none;
  const std::uint32_t limit = producer_limit.value_or(h.producer_load_threshold);
  if (state.active_producers(host) + 1 > limit) return PathDenial::producer_load;
  if (state.used_storage(host) + p.data_size > h.capacity)
    return PathDenial::storage;
  return PathDenial::none;
}

inline bool can_host_producer(const PlacementState& state, HostId host,
                              ProducerId producer,
                              std::optional<std::uint32_t> producer_limit = {}) {
  return producer_denial(state, host, producer, producer_limit) ==
         PathDenial::none;
}

inline bool can_host_consumer(const PlacementState& state, HostId host,
                              ConsumerId consumer) {
  const HostRecord& h = state.host(host);
  state.consumer(consumer);  // identifier check
  if (state.has_consumer(host, consumer)) return true;
  return state.active_consumers(host) + 1 <= h.consumer_load_threshold;
}

// Records that `producer` stores its data on `host`, consuming storage and a
// producer-load slot. Idempotent for an already-resident producer.
inline PathDenial assign_producer(PlacementState& state, ProducerId producer,
                                  HostId host,
                                  std::optional<std::uint32_t> producer_limit = {}) {
  const PathDenial d = producer_denial(state, host, producer, producer_limit);
  if (d != PathDenial::none) return d;
  if (state.is_assigned(producer, host)) return PathDenial::none;
  auto& ho = state.host_occ_[state.host_index_at(host)];
  auto& po = state.producer_occ_[state.producer_index_at(producer)];
  ho.assigned.push_back(producer);
  ho.used += state.producer(producer).data_size;
  po.hosts.push_back(host);
  ++state.assignment_count_;
  return PathDenial::none;
}

// Adds the delivery path (producer, host, consumer). The producer is assigned
// to the host as a side effect when not already resident.
inline PathDenial grant_path(PlacementState& state, ProducerId producer,
                             HostId host, ConsumerId consumer,
                             std::optional<std::uint32_t> producer_limit = {}) {
  state.host(host);  // identifier checks up front
  if (!state.subscribes(consumer, producer)) return PathDenial::not_subscribed;
  if (state.path_host(producer, consumer)) return PathDenial::single_path;
  if (!can_host_consumer(state, host, consumer)) return PathDenial::consumer_load;
  const PathDenial d = producer_denial(state, host, producer, producer_limit);
  if (d != PathDenial::none) return d;

  assign_producer(state, producer, host, producer_limit);
  auto& ho = state.host_occ_[state.host_index_at(host)];
  auto& po = state.producer_occ_[state.producer_index_at(producer)];
  ho.consumers.insert(consumer);
  if (po.consumer_set.insert(consumer).second) po.consumers.push_back(consumer);
  state.paths_.push_back({producer, host, consumer});
  state.pair_host_.emplace(
      (static_cast<std::uint64_t>(producer) << 32) | consumer, host);
  return PathDenial::none;
}

// Re-derives every counter from the raw triple and assignment sets and checks
// all placement invariants. Returns human-readable violations; empty means
// the state is sound.
inline std::vector<std::string> validate_state(const PlacementState& state) {
  std::vector<std::string> issues;
  const auto fail = [&](std::string msg) { issues.push_back(std::move(msg)); };

  std::set<std::pair<ProducerId, ConsumerId>> seen_pairs;
  std::unordered_map<HostId, std::set<ConsumerId>> host_consumers;
  std::unordered_map<HostId, std::set<ProducerId>> host_path_producers;
  std::unordered_map<ProducerId, std::set<ConsumerId>> producer_served;

  for (const auto& t : state.paths()) {
    if (!state.subscribes(t.consumer, t.producer))
      fail("path for unsubscribed pair (" + std::to_string(t.producer) + "," +
           std::to_string(t.consumer) + ")");
    if (!seen_pairs.insert({t.producer, t.consumer}).second)
      fail("pair (" + std::to_string(t.producer) + "," +
           std::to_string(t.consumer) + ") served through more than one host");
    if (!state.is_assigned(t.producer, t.host))
      fail("path through host " + std::to_string(t.host) +
           " without a hosting assignment for producer " +
           std::to_string(t.producer));
    host_consumers[t.host].insert(t.consumer);
    host_path_producers[t.host].insert(t.producer);
    producer_served[t.producer].insert(t.consumer);
  }

  for (const auto& h : state.hosts()) {
    const auto assigned = state.assigned_producers(h.id);
    std::set<ProducerId> assigned_set(assigned.begin(), assigned.end());
    if (assigned_set.size() != assigned.size())
      fail("host " + std::to_string(h.id) + " lists a producer twice");
    if (assigned.size() > h.producer_load_threshold)
      fail("host " + std::to_string(h.id) + " exceeds its producer load");
    Bytes used = 0;
    for (ProducerId p : assigned) used += state.producer(p).data_size;
    if (used != state.used_storage(h.id))
      fail("host " + std::to_string(h.id) + " storage counter drifted");
    if (used > h.capacity)
      fail("host " + std::to_string(h.id) + " exceeds its storage capacity");
    const auto& derived = host_consumers[h.id];
    if (derived.size() != state.active_consumers(h.id))
      fail("host " + std::to_string(h.id) + " consumer counter drifted");
    if (derived.size() > h.consumer_load_threshold)
      fail("host " + std::to_string(h.id) + " exceeds its consumer load");
    for (ProducerId p : host_path_producers[h.id])
      if (!assigned_set.count(p))
        fail("host " + std::to_string(h.id) +
             " carries paths of unassigned producer " + std::to_string(p));
  }

  for (const auto& p : state.producers()) {
    const auto& hosts_of = state.assigned_hosts(p.id);
    std::set<HostId> host_set(hosts_of.begin(), hosts_of.end());
    if (host_set.size() != hosts_of.size())
      fail("producer " + std::to_string(p.id) + " assigned to a host twice");
    if (!producer_served[p.id].empty() && hosts_of.empty())
      fail("producer " + std::to_string(p.id) +
           " serves consumers without a hosting assignment");
    const auto& served = state.served_consumers(p.id);
    if (served.size() != producer_served[p.id].size())
      fail("producer " + std::to_string(p.id) + " served-consumer list drifted");
  }
  return issues;
}

}  // namespace edgeplace
