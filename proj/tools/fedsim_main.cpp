// fedsim: configure, run and compare tiered federated-learning simulations.
//
// Subcommands:
//   run          execute one experiment, write CSV timeline + JSON summary
//   compare      tabulate several summaries side by side
//   sweep        re-run a base config along one axis, combined long CSV
//   encode-bench measure the codec compression ratio on Gaussian weights
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedsim/codec.hpp"
#include "fedsim/config.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunOverrides {
  std::optional<std::string> method;
  std::optional<std::string> aggregation;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> tiers;
  std::optional<double> lambda;
  std::optional<int> precision;
  bool lossless = false;
  std::optional<std::size_t> sample_size;
  std::optional<std::int64_t> rounds;
  std::optional<double> time_budget;
  std::optional<int> threads;
  std::optional<int> eval_every;
  std::optional<std::string> model;
  std::vector<double> targets;
  std::optional<std::string> name;
  std::optional<std::string> out_dir;
};

void apply_overrides(fedsim::ExperimentConfig& cfg, const RunOverrides& ov) {
  if (ov.method) cfg.method = fedsim::method_from_name(*ov.method);
  if (ov.aggregation) {
    if (*ov.aggregation == "weighted") {
      cfg.aggregation = fedsim::AggregationMode::Weighted;
    } else if (*ov.aggregation == "uniform") {
      cfg.aggregation = fedsim::AggregationMode::Uniform;
    } else {
      throw fedsim::ConfigError("aggregation", "expected 'weighted' or 'uniform'");
    }
  }
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.tiers) cfg.tiers = *ov.tiers;
  if (ov.lambda) cfg.lambda = *ov.lambda;
  if (ov.lossless) cfg.codec_precision = 0;
  if (ov.precision) cfg.codec_precision = *ov.precision;
  if (ov.sample_size) cfg.sample_size = *ov.sample_size;
  if (ov.rounds) cfg.round_budget = *ov.rounds;
  if (ov.time_budget) cfg.time_budget_seconds = *ov.time_budget;
  if (ov.threads) cfg.threads = *ov.threads;
  if (ov.eval_every) cfg.eval_every = *ov.eval_every;
  if (ov.model) {
    if (*ov.model == "logistic") {
      cfg.model = fedsim::ModelKind::Logistic;
    } else if (*ov.model == "mlp") {
      cfg.model = fedsim::ModelKind::Mlp;
    } else {
      throw fedsim::ConfigError("model", "expected 'logistic' or 'mlp'");
    }
  }
  if (!ov.targets.empty()) cfg.targets = ov.targets;
  if (ov.name) cfg.run_name = *ov.name;
  if (ov.out_dir) cfg.output_dir = *ov.out_dir;
  cfg.validate();
}

fs::path resolve_output_dir(const fedsim::ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("FEDSIM_OUT"); env != nullptr && *env != '\0') return env;
  return ".";
}

int execute_run(fedsim::ExperimentConfig cfg, const std::string& trace_path,
                const std::string& save_dataset_path, bool quiet) {
  const fs::path out_dir = resolve_output_dir(cfg);
  fs::create_directories(out_dir);
  const std::string stem = cfg.resolved_run_name();
  const fs::path csv_path = out_dir / (stem + ".csv");
  const fs::path summary_path = out_dir / (stem + ".summary.json");

  fedsim::EventTrace trace;
  fedsim::RunHooks hooks;
  if (!trace_path.empty()) hooks.trace = &trace;

  fedsim::RunSetup setup = fedsim::build_setup(cfg);
  if (!save_dataset_path.empty()) fedsim::save_dataset(setup.dataset, save_dataset_path);

  const fedsim::RunMetrics metrics = fedsim::run_simulation(setup, hooks);
  fedsim::write_metrics_csv(metrics, csv_path.string());
  fedsim::write_summary_json(metrics, cfg.targets, summary_path.string());
  if (!trace_path.empty()) trace.write_jsonl(trace_path);

  if (!quiet) {
    std::cout << "method=" << metrics.info.method << " seed=" << metrics.info.seed
              << " events=" << metrics.events.size();
    if (!metrics.events.empty()) {
      std::cout << " final_acc=" << fedsim::format_double(metrics.events.back().global_accuracy)
                << " final_smoothed="
                << fedsim::format_double(fedsim::final_smoothed_accuracy(metrics.events))
                << " sim_time=" << fedsim::format_double(metrics.events.back().sim_time);
    }
    std::cout << "\n  wrote " << csv_path.string() << "\n  wrote " << summary_path.string()
              << std::endl;
  }
  return 0;
}

struct SummaryRow {
  std::string method;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::size_t events = 0;
  double best_smoothed = 0.0;
  double final_smoothed = 0.0;
  double variance = 0.0;
  json targets;
};

SummaryRow read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw fedsim::Error("cannot open summary " + path.string());
  json j;
  in >> j;
  SummaryRow row;
  row.method = j.at("method").get<std::string>();
  row.seed = j.at("seed").get<std::uint64_t>();
  row.fingerprint = j.at("dataset_fingerprint").get<std::string>();
  row.events = j.at("events").get<std::size_t>();
  if (j.contains("best_smoothed_accuracy")) {
    row.best_smoothed = j.at("best_smoothed_accuracy").get<double>();
    row.final_smoothed = j.at("final_smoothed_accuracy").get<double>();
    row.variance = j.at("final_accuracy_variance").get<double>();
  }
  row.targets = j.value("targets", json::array());
  return row;
}

std::string cell_or_dash(const json& target_entry, const char* field, double scale = 1.0) {
  if (!target_entry.value("reached", false)) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(3)
      << target_entry.at(field).get<double>() * scale;
  return out.str();
}

int execute_compare(const std::vector<std::string>& paths, const std::string& out_csv) {
  std::vector<SummaryRow> rows;
  rows.reserve(paths.size());
  for (const auto& p : paths) rows.push_back(read_summary(p));

  for (const auto& row : rows) {
    if (row.fingerprint != rows.front().fingerprint) {
      throw fedsim::Error("dataset fingerprints differ: " + rows.front().fingerprint + " vs " +
                          row.fingerprint + " (" + row.method + ")");
    }
  }

  // Norm.Var. normalizes to the fedat row when present.
  double base_variance = 0.0;
  for (const auto& row : rows) {
    if (row.method == "fedat" && row.variance > 0.0) {
      base_variance = row.variance;
      break;
    }
  }

  // Targets common to every summary, in the first summary's order.
  std::vector<double> common_targets;
  if (!rows.empty()) {
    for (const auto& entry : rows.front().targets) {
      const double t = entry.at("target").get<double>();
      bool everywhere = true;
      for (const auto& row : rows) {
        bool found = false;
        for (const auto& e : row.targets) {
          if (e.at("target").get<double>() == t) found = true;
        }
        everywhere = everywhere && found;
      }
      if (everywhere) common_targets.push_back(t);
    }
  }

  std::ostringstream csv;
  csv << "method,seed,events,best_smoothed_accuracy,final_smoothed_accuracy,variance,norm_var";
  for (const double t : common_targets) {
    csv << ",time_to_" << t << ",uplink_mb_to_" << t << ",downlink_mb_to_" << t;
  }
  csv << "\n";

  std::cout << std::left << std::setw(10) << "method" << std::setw(6) << "seed" << std::setw(8)
            << "events" << std::setw(10) << "best" << std::setw(10) << "final" << std::setw(12)
            << "variance" << std::setw(10) << "norm_var";
  for (const double t : common_targets) {
    std::ostringstream h;
    h << "t@" << t;
    std::cout << std::setw(12) << h.str();
    std::ostringstream h2;
    h2 << "upMB@" << t;
    std::cout << std::setw(12) << h2.str();
  }
  std::cout << "\n";

  for (const auto& row : rows) {
    const std::string norm_var =
        base_variance > 0.0
            ? (std::ostringstream() << std::fixed << std::setprecision(2)
                                    << row.variance / base_variance)
                  .str()
            : "-";
    csv << row.method << ',' << row.seed << ',' << row.events << ','
        << fedsim::format_double(row.best_smoothed) << ','
        << fedsim::format_double(row.final_smoothed) << ','
        << fedsim::format_double(row.variance) << ',' << norm_var;
    std::cout << std::left << std::setw(10) << row.method << std::setw(6) << row.seed
              << std::setw(8) << row.events << std::setw(10) << std::fixed
              << std::setprecision(4) << row.best_smoothed << std::setw(10) << row.final_smoothed
              << std::setw(12) << std::setprecision(6) << row.variance << std::setw(10)
              << norm_var;
    for (const double t : common_targets) {
      json entry;
      for (const auto& e : row.targets) {
        if (e.at("target").get<double>() == t) entry = e;
      }
      const std::string time_cell = cell_or_dash(entry, "sim_time");
      std::string up_cell = "-";
      std::string down_cell = "-";
      if (entry.value("reached", false)) {
        const double mb = 1.0 / (1024.0 * 1024.0);
        up_cell = (std::ostringstream() << std::fixed << std::setprecision(3)
                                        << entry.at("uplink_bytes").get<double>() * mb)
                      .str();
        down_cell = (std::ostringstream() << std::fixed << std::setprecision(3)
                                          << entry.at("downlink_bytes").get<double>() * mb)
                        .str();
      }
      csv << ',' << time_cell << ',' << up_cell << ',' << down_cell;
      std::cout << std::setw(12) << time_cell << std::setw(12) << up_cell;
    }
    csv << "\n";
    std::cout << "\n";
  }

  if (!out_csv.empty()) {
    std::ofstream out(out_csv, std::ios::binary);
    if (!out) throw fedsim::Error("cannot open " + out_csv);
    out << csv.str();
    std::cout << "wrote " << out_csv << std::endl;
  }
  return 0;
}

int execute_sweep(const std::string& axis, const std::vector<std::string>& values,
                  fedsim::ExperimentConfig base, const RunOverrides& overrides) {
  apply_overrides(base, overrides);
  const fs::path out_dir = resolve_output_dir(base);
  fs::create_directories(out_dir);

  std::ostringstream combined;
  combined << "axis,value,event,sim_time,round,global_accuracy,smoothed_accuracy,"
              "uplink_bytes,downlink_bytes\n";

  std::vector<std::string> failures;
  for (const std::string& value : values) {
    fedsim::ExperimentConfig cfg = base;
    std::string label = value;
    try {
      if (axis == "classes_per_client") {
        cfg.data.classes_per_client = std::stoi(value);
      } else if (axis == "participation") {
        cfg.sample_size = static_cast<std::size_t>(std::stoul(value));
      } else if (axis == "precision") {
        if (value == "lossless") {
          cfg.codec_precision = 0;
        } else {
          cfg.codec_precision = std::stoi(value);
        }
        label = value == "lossless" ? "0" : value;
      } else {
        throw fedsim::ConfigError(
            "axis", "expected classes_per_client, participation or precision, got '" + axis + "'");
      }
      cfg.run_name = base.resolved_run_name() + "_" + axis + "_" + value;
      cfg.validate();

      const fedsim::RunMetrics metrics = fedsim::run_experiment(cfg);
      fedsim::write_metrics_csv(metrics,
                                (out_dir / (cfg.run_name + ".csv")).string());
      fedsim::write_summary_json(metrics, cfg.targets,
                                 (out_dir / (cfg.run_name + ".summary.json")).string());

      const auto smoothed = fedsim::smoothed_accuracy(metrics.events);
      for (std::size_t i = 0; i < metrics.events.size(); ++i) {
        const auto& ev = metrics.events[i];
        combined << axis << ',' << label << ',' << ev.event_index << ','
                 << fedsim::format_double(ev.sim_time) << ',' << ev.round << ','
                 << fedsim::format_double(ev.global_accuracy) << ','
                 << fedsim::format_double(smoothed[i]) << ',' << ev.uplink_bytes_cum << ','
                 << ev.downlink_bytes_cum << "\n";
      }
      std::cout << axis << "=" << value << ": events=" << metrics.events.size()
                << " final_smoothed="
                << fedsim::format_double(fedsim::final_smoothed_accuracy(metrics.events))
                << std::endl;
    } catch (const std::exception& e) {
      failures.push_back(axis + "=" + value + ": " + e.what());
      std::cerr << "error: " << failures.back() << std::endl;
    }
  }

  const fs::path combined_path = out_dir / ("sweep_" + axis + ".csv");
  std::ofstream out(combined_path, std::ios::binary);
  if (!out) throw fedsim::Error("cannot open " + combined_path.string());
  out << combined.str();
  std::cout << "wrote " << combined_path.string() << std::endl;

  if (!failures.empty()) {
    std::cerr << failures.size() << " run(s) failed:" << std::endl;
    for (const auto& f : failures) std::cerr << "  " << f << std::endl;
    return 2;
  }
  return 0;
}

int execute_encode_bench(std::size_t count, double sigma, int precision, std::uint64_t seed) {
  fedsim::Rng rng(fedsim::subseed(seed, fedsim::StreamTag::kBench));
  fedsim::ParamVector weights;
  weights.shapes = {{static_cast<std::int64_t>(count)}};
  weights.values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) weights.values.push_back(sigma * rng.normal());

  const fedsim::Codec codec =
      precision == 0 ? fedsim::Codec::lossless() : fedsim::Codec::polyline(precision);
  const auto t0 = std::chrono::steady_clock::now();
  const fedsim::EncodedModel encoded = codec.compress(weights);
  const auto t1 = std::chrono::steady_clock::now();
  const fedsim::ParamVector decoded = codec.decompress(encoded);
  const auto t2 = std::chrono::steady_clock::now();

  const double raw_bytes = static_cast<double>(count) * 8.0;
  const double enc_bytes = static_cast<double>(encoded.accounted_bytes());
  const double ratio = raw_bytes / enc_bytes;

  double max_err = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    max_err = std::max(max_err, std::fabs(decoded.values[i] - weights.values[i]));
  }

  const auto us = [](auto d) {
    return std::chrono::duration_cast<std::chrono::microseconds>(d).count();
  };
  std::cout << "values=" << count << " sigma=" << sigma << " codec=" << codec.describe() << "\n"
            << "raw_bytes=" << static_cast<std::uint64_t>(raw_bytes)
            << " encoded_bytes=" << encoded.accounted_bytes() << " ratio="
            << std::fixed << std::setprecision(3) << ratio << "\n"
            << "max_roundtrip_error=" << std::scientific << max_err << "\n"
            << std::fixed << "encode_us=" << us(t1 - t0) << " decode_us=" << us(t2 - t1)
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedsim: tiered federated-learning simulator"};
  app.require_subcommand(1);

  // --- run ---
  auto* run = app.add_subcommand("run", "Run one experiment");
  std::string config_path;
  std::string trace_path;
  std::string save_dataset_path;
  bool quiet = false;
  RunOverrides ov;
  run->add_option("--config", config_path, "JSON config file (defaults used when omitted)");
  run->add_option("--method", ov.method, "fedat | fedavg | tifl | fedasync");
  run->add_option("--aggregation", ov.aggregation, "weighted | uniform");
  run->add_option("--seed", ov.seed, "Master seed");
  run->add_option("--tiers", ov.tiers, "Number of tiers M");
  run->add_option("--lambda", ov.lambda, "Proximal coefficient");
  run->add_option("--precision", ov.precision, "Codec decimal places (1-9)");
  run->add_flag("--lossless", ov.lossless, "Use the lossless debug codec");
  run->add_option("--sample-size", ov.sample_size, "Clients sampled per round");
  run->add_option("--rounds", ov.rounds, "Aggregation-round budget");
  run->add_option("--time-budget", ov.time_budget, "Simulated-seconds budget");
  run->add_option("--threads", ov.threads, "Worker threads for local training");
  run->add_option("--eval-every", ov.eval_every, "Evaluate every Nth aggregation event");
  run->add_option("--model", ov.model, "logistic | mlp");
  run->add_option("--target", ov.targets, "Accuracy target(s) for the summary");
  run->add_option("--name", ov.name, "Output file stem");
  run->add_option("--out", ov.out_dir, "Output directory (default $FEDSIM_OUT or .)");
  run->add_option("--trace", trace_path, "Write the event trace as JSON lines");
  run->add_option("--save-dataset", save_dataset_path, "Export the dataset for replay");
  run->add_flag("--quiet", quiet, "Suppress the one-line result");

  // --- compare ---
  auto* compare = app.add_subcommand("compare", "Tabulate summary JSONs side by side");
  std::vector<std::string> summary_paths;
  std::string compare_out;
  compare->add_option("summaries", summary_paths, "Summary JSON files")->required()
      ->expected(2, -1);
  compare->add_option("--out", compare_out, "Also write the table as CSV");

  // --- sweep ---
  auto* sweep = app.add_subcommand("sweep", "Run a base config along one axis");
  std::string axis;
  std::vector<std::string> values;
  std::string sweep_config_path;
  sweep->add_option("--axis", axis, "classes_per_client | participation | precision")
      ->required();
  sweep->add_option("--values", values, "Axis values (precision also accepts 'lossless')")
      ->required()
      ->delimiter(',');
  sweep->add_option("--config", sweep_config_path, "Base JSON config");
  sweep->add_option("--method", ov.method, "Override method for the whole sweep");
  sweep->add_option("--seed", ov.seed, "Override seed for the whole sweep");
  sweep->add_option("--out", ov.out_dir, "Output directory");
  sweep->add_option("--threads", ov.threads, "Worker threads");
  sweep->add_option("--rounds", ov.rounds, "Aggregation-round budget");
  sweep->add_option("--time-budget", ov.time_budget, "Simulated-seconds budget");

  // --- encode-bench ---
  auto* bench = app.add_subcommand("encode-bench", "Codec compression-ratio benchmark");
  std::size_t bench_count = 100000;
  double bench_sigma = 0.1;
  int bench_precision = 4;
  std::uint64_t bench_seed = 1;
  bench->add_option("--count", bench_count, "Number of weights");
  bench->add_option("--sigma", bench_sigma, "Gaussian standard deviation");
  bench->add_option("--precision", bench_precision, "Codec precision (0 = lossless)");
  bench->add_option("--seed", bench_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      fedsim::ExperimentConfig cfg;
      if (!config_path.empty()) cfg = fedsim::load_config_file(config_path);
      apply_overrides(cfg, ov);
      return execute_run(std::move(cfg), trace_path, save_dataset_path, quiet);
    }
    if (compare->parsed()) return execute_compare(summary_paths, compare_out);
    if (sweep->parsed()) {
      fedsim::ExperimentConfig base;
      if (!sweep_config_path.empty()) base = fedsim::load_config_file(sweep_config_path);
      return execute_sweep(axis, values, std::move(base), ov);
    }
    if (bench->parsed()) {
      return execute_encode_bench(bench_count, bench_sigma, bench_precision, bench_seed);
    }
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
