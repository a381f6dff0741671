#pragma once

#include <functional>
#include <memory>

#include "fedsim/codec.hpp"
#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/sim.hpp"
#include "fedsim/tiering.hpp"

namespace fedsim {

/// A fully resolved experiment: dataset, model, tiers, schedules. Built from
/// an ExperimentConfig (or assembled by hand in tests) and then executed.
struct RunSetup {
  Method method = Method::FedAt;
  AggregationMode aggregation = AggregationMode::Weighted;
  FederatedDataset dataset;
  std::unique_ptr<Model> model;
  ParamVector initial_model;
  SolverConfig solver;
  double lambda = 0.0;
  Codec codec = Codec::polyline(4);
  DelayModel delays;
  DropoutSchedule dropouts;
  LatencyParams latency;
  TierTable tiers;
  LatencyProfile profile;
  std::size_t sample_size = 10;
  double fedasync_alpha = 0.6;
  double fedasync_staleness_exponent = 0.0;
  std::int64_t round_budget = 0;
  double time_budget = 0.0;  // 0 = unlimited
  std::uint64_t seed = 1;
  int threads = 1;
  int eval_every = 1;
  std::string resolved_config_json;
};

struct RunHooks {
  EventTrace* trace = nullptr;
  /// Called with (t, global model) after every aggregation event.
  std::function<void(std::int64_t round, const ParamVector& global)> on_global_model;
};

/// Builds the dataset (generate or load), the model, the delay/dropout
/// schedules, then profiles and partitions the clients into tiers.
RunSetup build_setup(const ExperimentConfig& cfg);
RunSetup build_setup(const ExperimentConfig& cfg, FederatedDataset dataset);

/// Runs the discrete-event simulation for the configured method until the
/// round budget or the simulated-time budget is exhausted. Deterministic for
/// a fixed setup, independent of the thread count.
RunMetrics run_simulation(const RunSetup& setup, const RunHooks& hooks = {});

/// Convenience: build_setup + run_simulation.
RunMetrics run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks = {});

}  // namespace fedsim
