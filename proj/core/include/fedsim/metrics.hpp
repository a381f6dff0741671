#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/tiering.hpp"

namespace fedsim {

/// Accuracy curves are smoothed with a trailing mean over this many events
/// (partial windows at the start of a run use the events available so far).
inline constexpr int kSmoothingWindow = 40;

/// One row per aggregation event.
struct EventRecord {
  std::int64_t event_index = 0;
  double sim_time = 0.0;
  std::int64_t round = 0;  // t after this event
  int tier = -1;           // -1 when the method has no tier notion for the event
  double global_accuracy = 0.0;
  double accuracy_variance = 0.0;
  std::vector<double> per_client_accuracy;  // NaN marks a dropped client
  std::uint64_t uplink_bytes_cum = 0;
  std::uint64_t downlink_bytes_cum = 0;
  double gamma_mean = 0.0;  // NaN when every client was already stationary
};

struct RunInfo {
  std::string method;
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  std::string codec;
  std::string resolved_config_json;  // embedded verbatim in every output file
  std::vector<std::vector<int>> tier_members;
  std::vector<std::int64_t> tier_update_counts;  // final T_tier_m (tiered methods)
  std::size_t num_clients = 0;
};

struct RunMetrics {
  RunInfo info;
  std::vector<EventRecord> events;
};

// --- Evaluation ---------------------------------------------------------------

struct Evaluation {
  double global_accuracy = 0.0;
  std::vector<double> per_client;  // NaN for excluded clients
};

/// Per-client accuracy of the model on each client's test split and the
/// global accuracy over the union test set. Clients flagged in `excluded`
/// get NaN and do not contribute to the variance; the union set is fixed for
/// the whole run so the global curve stays comparable over time.
Evaluation evaluate_model(const Model& model, const ParamVector& params,
                          const FederatedDataset& ds,
                          const std::vector<bool>* excluded = nullptr);

/// Population variance (divide by count), ignoring NaN entries.
double population_variance(std::span<const double> values);

// --- Target crossings ------------------------------------------------------------

/// Trailing mean over kSmoothingWindow events. Entries before the first full
/// window are NaN: a smoothed value only exists once 40 events back it.
std::vector<double> smoothed_accuracy(std::span<const EventRecord> events);

/// Mean accuracy of the last min(40, n) events; NaN for an empty stream.
/// Falls back to the short-stream tail so the value always exists.
double final_smoothed_accuracy(std::span<const EventRecord> events);
double best_smoothed_accuracy(std::span<const EventRecord> events);

struct Crossing {
  bool reached = false;
  std::int64_t event_index = -1;
  double sim_time = 0.0;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
};

/// First event whose smoothed accuracy reaches the target; `reached == false`
/// mirrors the "-" convention for unreachable targets.
Crossing time_to_accuracy(std::span<const EventRecord> events, double target);

/// Same crossing, reported as the cumulative byte counters at that event.
Crossing bytes_to_accuracy(std::span<const EventRecord> events, double target);

// --- Output files ------------------------------------------------------------------

/// CSV: comment header (method, seed, fingerprint, config, tiers) then one row
/// per event with fixed columns
///   event,sim_time,round,tier,global_accuracy,accuracy_variance,
///   uplink_bytes,downlink_bytes,gamma_mean,acc_client_<i>...
/// Dropped clients print as empty cells. Formatting is locale-independent and
/// byte-stable for identical runs.
void write_metrics_csv(const RunMetrics& metrics, const std::string& path);

void write_summary_json(const RunMetrics& metrics, std::span<const double> targets,
                        const std::string& path);

std::string format_double(double v);

}  // namespace fedsim
