#include "fedsim/tiering.hpp"

#include <algorithm>
#include <numeric>

namespace fedsim {

void TierTable::record_update(std::size_t tier) {
  if (tier >= update_counts.size()) {
    throw Error("record_update: tier index " + std::to_string(tier) + " out of range [0, " +
                std::to_string(update_counts.size()) + ")");
  }
  update_counts[tier] += 1;
  total_updates += 1;
}

LatencyProfile profile_clients(std::size_t num_clients, int probe_rounds,
                               const RoundLatencyFn& round_latency) {
  if (probe_rounds < 1) throw Error("profile_clients: probe_rounds must be >= 1");
  LatencyProfile profile;
  profile.seconds.resize(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) {
    double total = 0.0;
    for (int r = 0; r < probe_rounds; ++r) {
      total += round_latency(static_cast<int>(c), r);
    }
    profile.seconds[c] = total / probe_rounds;
  }
  return profile;
}

TierTable partition_by_latency(const LatencyProfile& profile, std::size_t num_tiers) {
  const std::size_t n = profile.seconds.size();
  if (num_tiers < 1) throw Error("partition_by_latency: need at least one tier");
  if (num_tiers > n) {
    throw Error("partition_by_latency: more tiers (" + std::to_string(num_tiers) +
                ") than clients (" + std::to_string(n) + ")");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double la = profile.seconds[static_cast<std::size_t>(a)];
    const double lb = profile.seconds[static_cast<std::size_t>(b)];
    return la != lb ? la < lb : a < b;
  });

  TierTable table;
  table.members.resize(num_tiers);
  table.update_counts.assign(num_tiers, 0);
  const std::size_t base = n / num_tiers;
  const std::size_t remainder = n % num_tiers;
  std::size_t pos = 0;
  for (std::size_t m = 0; m < num_tiers; ++m) {
    // Remainder clients land in the slowest tiers, one each.
    const std::size_t size = base + (m >= num_tiers - remainder ? 1 : 0);
    auto& tier = table.members[m];
    tier.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(tier.begin(), tier.end());
    pos += size;
  }
  return table;
}

}  // namespace fedsim
