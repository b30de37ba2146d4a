#pragma once

// Exhaustive minimizer of the mean path latency over all feasible path
// assignments, for tiny instances only. Enumerates one host choice per
// subscribed (producer, consumer) pair -- the single-path constraint makes
// that the exact search space -- and keeps the feasible assignment with the
// lowest mean, breaking ties towards the lexicographically smallest host
// vector. Ground truth for heuristic quality.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeplace/model.hpp"

namespace edgeplace {

class SizeGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PairAssignment {
  ProducerId producer = 0;
  ConsumerId consumer = 0;
  HostId host = 0;
};

struct OracleResult {
  bool feasible = false;
  Millis objective = 0;  // mean path latency over all served pairs
  std::vector<PairAssignment> assignment;
  std::uint64_t assignments_tried = 0;  // complete assignments visited
};

inline OracleResult optimal_placement(std::span<const HostRecord> hosts,
                                      std::span<const ProducerRecord> producers,
                                      std::span<const ConsumerRecord> consumers,
                                      const LatencyModel& latency,
                                      Bytes chunk_size,
                                      std::uint64_t max_assignments = 1'000'000) {
  struct Pair {
    std::size_t producer_ix;
    std::size_t consumer_ix;
  };
  std::vector<Pair> pairs;
  for (std::size_t k = 0; k < consumers.size(); ++k) {
    for (ProducerId pid : consumers[k].subscriptions) {
      for (std::size_t i = 0; i < producers.size(); ++i)
        if (producers[i].id == pid) {
          pairs.push_back({i, k});
          break;
        }
    }
  }

  // Size guard: h^pairs candidate assignments.
  {
    double combos = 1;
    for (std::size_t n = 0; n < pairs.size(); ++n) {
      combos *= static_cast<double>(hosts.size());
      if (combos > static_cast<double>(max_assignments))
        throw SizeGuardError("instance too large to enumerate: " +
                             std::to_string(hosts.size()) + "^" +
                             std::to_string(pairs.size()) + " assignments");
    }
  }

  OracleResult result;
  if (pairs.empty()) {
    // Nothing to serve; the empty assignment is trivially optimal.
    result.feasible = true;
    result.objective = 0;
    result.assignments_tried = 1;
    return result;
  }

  // Path latency of pair `q` through host `j`, precomputed.
  std::vector<std::vector<Millis>> lat(pairs.size(),
                                       std::vector<Millis>(hosts.size(), 0));
  for (std::size_t q = 0; q < pairs.size(); ++q)
    for (std::size_t j = 0; j < hosts.size(); ++j)
      lat[q][j] = path_latency(producers[pairs[q].producer_ix], hosts[j],
                               consumers[pairs[q].consumer_ix], latency,
                               chunk_size);

  struct HostUse {
    std::vector<std::uint8_t> has_producer;
    std::vector<std::uint8_t> has_consumer;
    std::uint32_t nproducers = 0;
    std::uint32_t nconsumers = 0;
    Bytes used = 0;
  };
  std::vector<HostUse> use(hosts.size());
  for (auto& u : use) {
    u.has_producer.assign(producers.size(), 0);
    u.has_consumer.assign(consumers.size(), 0);
  }

  std::vector<std::size_t> choice(pairs.size(), 0);
  std::vector<std::size_t> best_choice;
  Millis best_sum = 0;
  bool have_best = false;
  std::uint64_t tried = 0;

  // Depth-first over pair index; hosts visited in span order so the first
  // optimum found is the lexicographic minimum among ties.
  auto descend = [&](auto&& self, std::size_t q, Millis sum) -> void {
    if (have_best && sum > best_sum) return;
    if (q == pairs.size()) {
      ++tried;
      if (!have_best || sum < best_sum) {
        have_best = true;
        best_sum = sum;
        best_choice = choice;
      }
      return;
    }
    const auto [pi, ci] = pairs[q];
    const Bytes size = producers[pi].data_size;
    for (std::size_t j = 0; j < hosts.size(); ++j) {
      auto& u = use[j];
      const bool new_producer = !u.has_producer[pi];
      const bool new_consumer = !u.has_consumer[ci];
      if (new_producer) {
        if (u.nproducers + 1 > hosts[j].producer_load_threshold) continue;
        if (u.used + size > hosts[j].capacity) continue;
      }
      if (new_consumer && u.nconsumers + 1 > hosts[j].consumer_load_threshold)
        continue;
      if (new_producer) {
        u.has_producer[pi] = 1;
        ++u.nproducers;
        u.used += size;
      }
      if (new_consumer) {
        u.has_consumer[ci] = 1;
        ++u.nconsumers;
      }
      choice[q] = j;
      self(self, q + 1, sum + lat[q][j]);
      if (new_producer) {
        u.has_producer[pi] = 0;
        --u.nproducers;
        u.used -= size;
      }
      if (new_consumer) {
        u.has_consumer[ci] = 0;
        --u.nconsumers;
      }
    }
  };
  descend(descend, 0, 0);

  result.assignments_tried = tried;
  if (!have_best) return result;  // infeasible: no assignment serves all pairs

  result.feasible = true;
  result.objective = best_sum / static_cast<Millis>(pairs.size());
  result.assignment.reserve(pairs.size());
  for (std::size_t q = 0; q < pairs.size(); ++q)
    result.assignment.push_back({producers[pairs[q].producer_ix].id,
                                 consumers[pairs[q].consumer_ix].id,
                                 hosts[best_choice[q]].id});
  return result;
}

}  // namespace edgeplace
