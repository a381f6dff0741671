#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/sim.hpp"

namespace fedsim {

enum class Method { FedAt, FedAvg, TiFl, FedAsync };

const char* method_name(Method method);
Method method_from_name(const std::string& name);

enum class ModelKind { Logistic, Mlp };

/// Everything needed to reproduce one experiment. A resolved copy is embedded
/// in every output file; re-running from that copy reproduces the run
/// byte-for-byte.
struct ExperimentConfig {
  Method method = Method::FedAt;
  AggregationMode aggregation = AggregationMode::Weighted;
  std::uint64_t seed = 1;
  int threads = 1;

  ModelKind model = ModelKind::Logistic;
  int hidden_units = 32;

  DataGenConfig data;
  std::string dataset_path;  // when set, load instead of generating

  SolverConfig solver;
  /// Proximal coefficient of the tiered method's local objective; the plain
  /// baselines (fedavg, tifl, fedasync) always train on the unmodified loss.
  double lambda = 0.4;

  /// 1..9 = polyline decimal places; 0 = lossless debug codec.
  int codec_precision = 4;

  std::size_t tiers = 5;
  int probe_rounds = 3;
  std::vector<DelayBand> delay_bands = DelayModel::default_bands();

  std::size_t dropout_count = 10;
  /// 0 = derive from the sim-time budget.
  double dropout_horizon_seconds = 0.0;

  std::size_t sample_size = 10;

  double fedasync_alpha = 0.6;
  double fedasync_staleness_exponent = 0.0;  // 0 = plain constant mixing

  LatencyParams latency;

  std::int64_t round_budget = 1000000;
  double time_budget_seconds = 1500.0;

  int eval_every = 1;
  std::vector<double> targets;

  std::string run_name;    // output file stem; defaults to <method>_s<seed>
  std::string output_dir;  // defaults to $FEDSIM_OUT or "."

  void validate() const;
  std::string resolved_run_name() const;
};

/// Strict JSON parsing: unknown keys raise ConfigError naming the field.
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// JSON of the scenario alone: execution knobs that cannot change results
/// (threads, run_name, output_dir) are normalized away, so runs of the same
/// scenario embed byte-identical configs in their outputs.
std::string scenario_to_json(const ExperimentConfig& cfg);

std::unique_ptr<Model> make_model(const ExperimentConfig& cfg);

}  // namespace fedsim
