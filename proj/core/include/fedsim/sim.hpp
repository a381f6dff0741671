#pragma once

#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Tie order for simultaneous events is (time, kind, subject, sequence), so the
// dispatch order is a pure function of the schedule.
enum class EventKind : int { ClientFinish = 0, TierComplete = 1, Dropout = 2 };

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::ClientFinish;
  int subject = 0;  // client id or tier index
  std::uint64_t sequence = 0;
};

const char* event_kind_name(EventKind kind);

struct SimEventAfter {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
    if (a.subject != b.subject) return a.subject > b.subject;
    return a.sequence > b.sequence;
  }
};

using EventQueue = std::priority_queue<SimEvent, std::vector<SimEvent>, SimEventAfter>;

/// Chronological record of everything that happened; dumpable as JSON lines.
class EventTrace {
 public:
  std::uint64_t push(double time, EventKind kind, int subject) {
    events_.push_back({time, kind, subject, next_sequence_});
    return next_sequence_++;
  }
  const std::vector<SimEvent>& events() const { return events_; }
  /// Events sorted by dispatch order.
  std::vector<SimEvent> ordered() const;
  void write_jsonl(const std::string& path) const;

 private:
  std::vector<SimEvent> events_;
  std::uint64_t next_sequence_ = 0;
};

// --- Injected per-round delays -------------------------------------------------

struct DelayBand {
  double low = 0.0;
  double high = 0.0;
};

struct DelayModel {
  std::vector<DelayBand> bands;
  std::vector<int> assignment;  // client id -> band index

  /// The evaluation's five bands: 0s, 0-5s, 6-10s, 11-15s, 20-30s.
  static std::vector<DelayBand> default_bands();

  /// Shuffles the clients (seeded) and splits them evenly over the bands.
  static DelayModel evenly_assigned(std::size_t num_clients, std::vector<DelayBand> bands,
                                    std::uint64_t seed);

  /// Uniform draw in the client's band; a pure function of (client, round, seed).
  double sample_round_delay(int client, std::int64_t round, std::uint64_t seed) const;
};

// --- Permanent dropouts ---------------------------------------------------------

struct DropoutSchedule {
  std::vector<double> drop_time;  // infinity = never drops

  static DropoutSchedule none(std::size_t num_clients);

  /// Picks `victims` distinct clients; each drop time is uniform over the
  /// first half of the horizon so dropouts land inside the run.
  static DropoutSchedule uniform_random(std::size_t num_clients, std::size_t victims,
                                        double horizon, std::uint64_t seed);

  bool alive(int client, double time) const {
    return time < drop_time[static_cast<std::size_t>(client)];
  }
  std::vector<int> victims() const;
};

// --- Client response latency ----------------------------------------------------

struct LatencyParams {
  /// Base compute cost of one optimizer step; calibrated so the injected
  /// delay bands dominate the latency of delayed clients.
  double seconds_per_step = 0.05;
  double bandwidth_bytes_per_sec = 1.0e6;
};

std::int64_t optimizer_steps_per_round(std::size_t num_examples, const SolverConfig& cfg);

/// Downlink transfer + local compute + injected delay + uplink transfer.
double client_response_latency(std::size_t num_examples, const SolverConfig& cfg,
                               const LatencyParams& latency, double injected_delay,
                               std::size_t downlink_bytes, std::size_t uplink_bytes);

inline constexpr double kNever = std::numeric_limits<double>::infinity();

}  // namespace fedsim
