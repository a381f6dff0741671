#include "fedsim/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace fedsim {
namespace {

using nlohmann::json;

void require_known_keys(const json& j, const std::string& scope,
                        const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError(scope.empty() ? key : scope + "." + key, "unknown field");
    }
  }
}

template <typename T>
void read(const json& j, const std::string& scope, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(scope.empty() ? key : scope + "." + std::string(key), e.what());
  }
}

}  // namespace

const char* method_name(Method method) {
  switch (method) {
    case Method::FedAt: return "fedat";
    case Method::FedAvg: return "fedavg";
    case Method::TiFl: return "tifl";
    case Method::FedAsync: return "fedasync";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "fedat") return Method::FedAt;
  if (name == "fedavg") return Method::FedAvg;
  if (name == "tifl") return Method::TiFl;
  if (name == "fedasync") return Method::FedAsync;
  throw ConfigError("method", "unknown method '" + name +
                                  "' (expected fedat, fedavg, tifl or fedasync)");
}

void ExperimentConfig::validate() const {
  data.validate();
  solver.validate();
  if (lambda < 0.0) throw ConfigError("lambda", "must be >= 0");
  if (codec_precision < 0 || codec_precision > 9) {
    throw ConfigError("codec_precision", "must be 1..9, or 0 for lossless");
  }
  if (tiers < 1) throw ConfigError("tiers", "must be >= 1");
  if (tiers > static_cast<std::size_t>(data.num_clients)) {
    throw ConfigError("tiers", "cannot exceed the number of clients");
  }
  if (probe_rounds < 1) throw ConfigError("probe_rounds", "must be >= 1");
  if (delay_bands.empty()) throw ConfigError("delay_bands", "need at least one band");
  for (const auto& band : delay_bands) {
    if (band.low < 0.0 || band.high < band.low) {
      throw ConfigError("delay_bands", "bands must satisfy 0 <= low <= high");
    }
  }
  if (dropout_count > static_cast<std::size_t>(data.num_clients)) {
    throw ConfigError("dropout_count", "cannot exceed the number of clients");
  }
  if (dropout_count > 0 && dropout_horizon_seconds <= 0.0 && time_budget_seconds <= 0.0) {
    throw ConfigError("dropout_horizon_seconds",
                      "dropouts need a horizon: set this or a positive sim-time budget");
  }
  if (sample_size < 1) throw ConfigError("sample_size", "must be >= 1");
  if (!(fedasync_alpha > 0.0 && fedasync_alpha <= 1.0)) {
    throw ConfigError("fedasync.alpha", "must be in (0, 1]");
  }
  if (fedasync_staleness_exponent < 0.0) {
    throw ConfigError("fedasync.staleness_exponent", "must be >= 0");
  }
  if (!(latency.seconds_per_step >= 0.0)) {
    throw ConfigError("latency.seconds_per_step", "must be >= 0");
  }
  if (!(latency.bandwidth_bytes_per_sec > 0.0)) {
    throw ConfigError("latency.bandwidth_bytes_per_sec", "must be > 0");
  }
  if (round_budget < 0) throw ConfigError("budget.rounds", "must be >= 0");
  if (time_budget_seconds < 0.0) throw ConfigError("budget.sim_time_seconds", "must be >= 0");
  if (round_budget == 0 && time_budget_seconds == 0.0) {
    throw ConfigError("budget", "at least one of rounds / sim_time_seconds must be positive");
  }
  if (eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
  if (model == ModelKind::Mlp && hidden_units < 1) {
    throw ConfigError("model.hidden_units", "must be >= 1");
  }
  for (const double t : targets) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("targets", "targets must lie in (0, 1)");
  }
}

std::string ExperimentConfig::resolved_run_name() const {
  if (!run_name.empty()) return run_name;
  return std::string(method_name(method)) + "_s" + std::to_string(seed);
}

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<json>", e.what());
  }

  ExperimentConfig cfg;
  require_known_keys(j, "", {"method", "aggregation", "seed", "threads", "model", "data",
                             "solver", "lambda", "codec", "tiers", "probe_rounds", "delay_bands",
                             "dropout", "sample_size", "fedasync", "latency", "budget",
                             "eval_every", "targets", "run_name", "output_dir"});

  if (j.contains("method")) cfg.method = method_from_name(j.at("method").get<std::string>());
  if (j.contains("aggregation")) {
    const auto mode = j.at("aggregation").get<std::string>();
    if (mode == "weighted") {
      cfg.aggregation = AggregationMode::Weighted;
    } else if (mode == "uniform") {
      cfg.aggregation = AggregationMode::Uniform;
    } else {
      throw ConfigError("aggregation", "expected 'weighted' or 'uniform', got '" + mode + "'");
    }
  }
  read(j, "", "seed", cfg.seed);
  read(j, "", "threads", cfg.threads);

  if (j.contains("model")) {
    const auto& jm = j.at("model");
    require_known_keys(jm, "model", {"kind", "hidden_units"});
    if (jm.contains("kind")) {
      const auto kind = jm.at("kind").get<std::string>();
      if (kind == "logistic") {
        cfg.model = ModelKind::Logistic;
      } else if (kind == "mlp") {
        cfg.model = ModelKind::Mlp;
      } else {
        throw ConfigError("model.kind", "expected 'logistic' or 'mlp', got '" + kind + "'");
      }
    }
    read(jm, "model", "hidden_units", cfg.hidden_units);
  }

  if (j.contains("data")) {
    const auto& jd = j.at("data");
    require_known_keys(jd, "data",
                       {"num_classes", "feature_dim", "samples_per_client", "num_clients",
                        "classes_per_client", "blob_scale", "sample_skew", "path"});
    read(jd, "data", "num_classes", cfg.data.num_classes);
    read(jd, "data", "feature_dim", cfg.data.feature_dim);
    read(jd, "data", "samples_per_client", cfg.data.samples_per_client);
    read(jd, "data", "num_clients", cfg.data.num_clients);
    read(jd, "data", "classes_per_client", cfg.data.classes_per_client);
    read(jd, "data", "blob_scale", cfg.data.blob_scale);
    read(jd, "data", "sample_skew", cfg.data.sample_skew);
    read(jd, "data", "path", cfg.dataset_path);
  }

  if (j.contains("solver")) {
    const auto& js = j.at("solver");
    require_known_keys(js, "solver",
                       {"learning_rate", "local_epochs", "batch_size", "optimizer", "adam_beta1",
                        "adam_beta2", "adam_epsilon"});
    read(js, "solver", "learning_rate", cfg.solver.learning_rate);
    read(js, "solver", "local_epochs", cfg.solver.local_epochs);
    read(js, "solver", "batch_size", cfg.solver.batch_size);
    if (js.contains("optimizer")) {
      const auto opt = js.at("optimizer").get<std::string>();
      if (opt == "sgd") {
        cfg.solver.optimizer = OptimizerKind::GradientDescent;
      } else if (opt == "adam") {
        cfg.solver.optimizer = OptimizerKind::Adam;
      } else {
        throw ConfigError("solver.optimizer", "expected 'sgd' or 'adam', got '" + opt + "'");
      }
    }
    read(js, "solver", "adam_beta1", cfg.solver.adam_beta1);
    read(js, "solver", "adam_beta2", cfg.solver.adam_beta2);
    read(js, "solver", "adam_epsilon", cfg.solver.adam_epsilon);
  }
  read(j, "", "lambda", cfg.lambda);

  if (j.contains("codec")) {
    const auto& jc = j.at("codec");
    require_known_keys(jc, "codec", {"precision", "lossless"});
    bool lossless = false;
    read(jc, "codec", "lossless", lossless);
    if (lossless) {
      cfg.codec_precision = 0;
    } else {
      read(jc, "codec", "precision", cfg.codec_precision);
    }
  }

  read(j, "", "tiers", cfg.tiers);
  read(j, "", "probe_rounds", cfg.probe_rounds);

  if (j.contains("delay_bands")) {
    cfg.delay_bands.clear();
    for (const auto& band : j.at("delay_bands")) {
      if (!band.is_array() || band.size() != 2) {
        throw ConfigError("delay_bands", "each band must be a [low, high] pair");
      }
      cfg.delay_bands.push_back({band[0].get<double>(), band[1].get<double>()});
    }
  }

  if (j.contains("dropout")) {
    const auto& jd = j.at("dropout");
    require_known_keys(jd, "dropout", {"count", "horizon_seconds"});
    read(jd, "dropout", "count", cfg.dropout_count);
    read(jd, "dropout", "horizon_seconds", cfg.dropout_horizon_seconds);
  }

  read(j, "", "sample_size", cfg.sample_size);

  if (j.contains("fedasync")) {
    const auto& jf = j.at("fedasync");
    require_known_keys(jf, "fedasync", {"alpha", "staleness_exponent"});
    read(jf, "fedasync", "alpha", cfg.fedasync_alpha);
    read(jf, "fedasync", "staleness_exponent", cfg.fedasync_staleness_exponent);
  }

  if (j.contains("latency")) {
    const auto& jl = j.at("latency");
    require_known_keys(jl, "latency", {"seconds_per_step", "bandwidth_bytes_per_sec"});
    read(jl, "latency", "seconds_per_step", cfg.latency.seconds_per_step);
    read(jl, "latency", "bandwidth_bytes_per_sec", cfg.latency.bandwidth_bytes_per_sec);
  }

  if (j.contains("budget")) {
    const auto& jb = j.at("budget");
    require_known_keys(jb, "budget", {"rounds", "sim_time_seconds"});
    read(jb, "budget", "rounds", cfg.round_budget);
    read(jb, "budget", "sim_time_seconds", cfg.time_budget_seconds);
  }

  read(j, "", "eval_every", cfg.eval_every);
  read(j, "", "targets", cfg.targets);
  read(j, "", "run_name", cfg.run_name);
  read(j, "", "output_dir", cfg.output_dir);

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_json(text);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["method"] = method_name(cfg.method);
  j["aggregation"] = cfg.aggregation == AggregationMode::Weighted ? "weighted" : "uniform";
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["model"] = {{"kind", cfg.model == ModelKind::Logistic ? "logistic" : "mlp"},
                {"hidden_units", cfg.hidden_units}};
  j["data"] = {{"num_classes", cfg.data.num_classes},
               {"feature_dim", cfg.data.feature_dim},
               {"samples_per_client", cfg.data.samples_per_client},
               {"num_clients", cfg.data.num_clients},
               {"classes_per_client", cfg.data.classes_per_client},
               {"blob_scale", cfg.data.blob_scale},
               {"sample_skew", cfg.data.sample_skew},
               {"path", cfg.dataset_path}};
  j["solver"] = {{"learning_rate", cfg.solver.learning_rate},
                 {"local_epochs", cfg.solver.local_epochs},
                 {"batch_size", cfg.solver.batch_size},
                 {"optimizer",
                  cfg.solver.optimizer == OptimizerKind::GradientDescent ? "sgd" : "adam"},
                 {"adam_beta1", cfg.solver.adam_beta1},
                 {"adam_beta2", cfg.solver.adam_beta2},
                 {"adam_epsilon", cfg.solver.adam_epsilon}};
  j["lambda"] = cfg.lambda;
  if (cfg.codec_precision == 0) {
    j["codec"] = {{"lossless", true}};
  } else {
    j["codec"] = {{"precision", cfg.codec_precision}};
  }
  j["tiers"] = cfg.tiers;
  j["probe_rounds"] = cfg.probe_rounds;
  json bands = json::array();
  for (const auto& band : cfg.delay_bands) bands.push_back({band.low, band.high});
  j["delay_bands"] = std::move(bands);
  j["dropout"] = {{"count", cfg.dropout_count},
                  {"horizon_seconds", cfg.dropout_horizon_seconds}};
  j["sample_size"] = cfg.sample_size;
  j["fedasync"] = {{"alpha", cfg.fedasync_alpha},
                   {"staleness_exponent", cfg.fedasync_staleness_exponent}};
  j["latency"] = {{"seconds_per_step", cfg.latency.seconds_per_step},
                  {"bandwidth_bytes_per_sec", cfg.latency.bandwidth_bytes_per_sec}};
  j["budget"] = {{"rounds", cfg.round_budget}, {"sim_time_seconds", cfg.time_budget_seconds}};
  j["eval_every"] = cfg.eval_every;
  j["targets"] = cfg.targets;
  j["run_name"] = cfg.run_name;
  j["output_dir"] = cfg.output_dir;
  return j.dump();
}

std::string scenario_to_json(const ExperimentConfig& cfg) {
  ExperimentConfig scenario = cfg;
  scenario.threads = 1;
  scenario.run_name.clear();
  scenario.output_dir.clear();
  return config_to_json(scenario);
}

std::unique_ptr<Model> make_model(const ExperimentConfig& cfg) {
  if (cfg.model == ModelKind::Logistic) {
    return std::make_unique<LogisticModel>(cfg.data.feature_dim, cfg.data.num_classes);
  }
  return std::make_unique<MlpModel>(cfg.data.feature_dim, cfg.hidden_units,
                                    cfg.data.num_classes);
}

}  // namespace fedsim
