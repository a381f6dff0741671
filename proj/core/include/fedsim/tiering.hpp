#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

/// Mean simulated response latency per client, indexed by client id.
struct LatencyProfile {
  std::vector<double> seconds;
};

/// Partition of the clients into ordered tiers (tier 0 fastest) plus the
/// per-tier update counters T_tier_m and their total T.
struct TierTable {
  std::vector<std::vector<int>> members;  // sorted client ids per tier
  std::vector<std::int64_t> update_counts;
  std::int64_t total_updates = 0;

  std::size_t tier_count() const { return members.size(); }

  /// Increments tier's counter and the total; throws on an out-of-range index.
  void record_update(std::size_t tier);
};

using RoundLatencyFn = std::function<double(int client, int probe_round)>;

/// Runs probe_rounds simulated rounds per client and records the mean
/// response latency. Determinism comes from the latency function itself.
LatencyProfile profile_clients(std::size_t num_clients, int probe_rounds,
                               const RoundLatencyFn& round_latency);

/// Sorts clients by profiled latency (ties by id) and splits them into
/// num_tiers groups of equal size; remainder clients go to the slowest tiers,
/// one each. Counters start at zero.
TierTable partition_by_latency(const LatencyProfile& profile, std::size_t num_tiers);

}  // namespace fedsim
