#include "fedsim/sim.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::ClientFinish: return "client-finish";
    case EventKind::TierComplete: return "tier-complete";
    case EventKind::Dropout: return "dropout";
  }
  return "unknown";
}

std::vector<SimEvent> EventTrace::ordered() const {
  std::vector<SimEvent> sorted = events_;
  SimEventAfter after;
  std::sort(sorted.begin(), sorted.end(),
            [&](const SimEvent& a, const SimEvent& b) { return after(b, a); });
  return sorted;
}

void EventTrace::write_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("EventTrace::write_jsonl: cannot open " + path);
  for (const auto& ev : ordered()) {
    char line[160];
    std::snprintf(line, sizeof(line), "{\"time\":%.17g,\"kind\":\"%s\",\"subject\":%d}\n", ev.time,
                  event_kind_name(ev.kind), ev.subject);
    out << line;
  }
}

std::vector<DelayBand> DelayModel::default_bands() {
  return {{0.0, 0.0}, {0.0, 5.0}, {6.0, 10.0}, {11.0, 15.0}, {20.0, 30.0}};
}

DelayModel DelayModel::evenly_assigned(std::size_t num_clients, std::vector<DelayBand> bands,
                                       std::uint64_t seed) {
  if (bands.empty()) throw Error("DelayModel: need at least one band");
  for (const auto& b : bands) {
    if (b.low < 0.0 || b.high < b.low) {
      throw Error("DelayModel: bands must satisfy 0 <= low <= high");
    }
  }
  DelayModel model;
  model.bands = std::move(bands);
  model.assignment.resize(num_clients);

  std::vector<int> order(num_clients);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(subseed(seed, StreamTag::kDelayAssign));
  shuffle(order, rng);

  const std::size_t parts = model.bands.size();
  const std::size_t base = num_clients / parts;
  const std::size_t remainder = num_clients % parts;
  std::size_t pos = 0;
  for (std::size_t part = 0; part < parts; ++part) {
    const std::size_t size = base + (part < remainder ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) {
      model.assignment[static_cast<std::size_t>(order[pos + i])] = static_cast<int>(part);
    }
    pos += size;
  }
  return model;
}

double DelayModel::sample_round_delay(int client, std::int64_t round, std::uint64_t seed) const {
  const auto c = static_cast<std::size_t>(client);
  if (c >= assignment.size()) {
    throw Error("sample_round_delay: client " + std::to_string(client) + " has no band");
  }
  const DelayBand& band = bands[static_cast<std::size_t>(assignment[c])];
  if (band.low == band.high) return band.low;
  Rng rng(subseed(seed, StreamTag::kRoundDelay, static_cast<std::uint64_t>(client),
                  static_cast<std::uint64_t>(round)));
  return rng.uniform(band.low, band.high);
}

DropoutSchedule DropoutSchedule::none(std::size_t num_clients) {
  DropoutSchedule s;
  s.drop_time.assign(num_clients, kNever);
  return s;
}

DropoutSchedule DropoutSchedule::uniform_random(std::size_t num_clients, std::size_t victims,
                                                double horizon, std::uint64_t seed) {
  if (victims > num_clients) throw Error("DropoutSchedule: more victims than clients");
  if (victims > 0 && !(horizon > 0.0)) {
    throw Error("DropoutSchedule: dropouts need a positive time horizon");
  }
  DropoutSchedule s = none(num_clients);
  std::vector<int> pool(num_clients);
  std::iota(pool.begin(), pool.end(), 0);
  Rng pick(subseed(seed, StreamTag::kDropoutPick));
  const auto chosen = sample_without_replacement(pool, victims, pick);
  for (const int client : chosen) {
    Rng rng(subseed(seed, StreamTag::kDropoutTime, static_cast<std::uint64_t>(client)));
    s.drop_time[static_cast<std::size_t>(client)] = rng.uniform(0.0, horizon / 2.0);
  }
  return s;
}

std::vector<int> DropoutSchedule::victims() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < drop_time.size(); ++c) {
    if (drop_time[c] != kNever) out.push_back(static_cast<int>(c));
  }
  return out;
}

std::int64_t optimizer_steps_per_round(std::size_t num_examples, const SolverConfig& cfg) {
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((num_examples + batch - 1) / batch);
  return steps_per_epoch * cfg.local_epochs;
}

double client_response_latency(std::size_t num_examples, const SolverConfig& cfg,
                               const LatencyParams& latency, double injected_delay,
                               std::size_t downlink_bytes, std::size_t uplink_bytes) {
  const double compute =
      latency.seconds_per_step * static_cast<double>(optimizer_steps_per_round(num_examples, cfg));
  const double transfer = static_cast<double>(downlink_bytes + uplink_bytes) /
                          latency.bandwidth_bytes_per_sec;
  return compute + injected_delay + transfer;
}

}  // namespace fedsim
