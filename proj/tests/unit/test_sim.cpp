#include <bit>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fedsim/runner.hpp"

using namespace fedsim;

namespace {

bool bits_equal(const ParamVector& a, const ParamVector& b) {
  if (a.values.size() != b.values.size()) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.values[i]) != std::bit_cast<std::uint64_t>(b.values[i])) {
      return false;
    }
  }
  return true;
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.data.num_classes = 4;
  cfg.data.feature_dim = 6;
  cfg.data.samples_per_client = 30;
  cfg.data.num_clients = 8;
  cfg.data.classes_per_client = 2;
  cfg.solver.learning_rate = 0.05;
  cfg.solver.local_epochs = 2;
  cfg.solver.batch_size = 10;
  cfg.lambda = 0.0;
  cfg.codec_precision = 0;  // lossless
  cfg.tiers = 1;
  cfg.delay_bands = {{0.0, 0.0}};
  cfg.dropout_count = 0;
  cfg.sample_size = 4;
  cfg.round_budget = 8;
  cfg.time_budget_seconds = 0.0;
  cfg.seed = 5;
  return cfg;
}

std::vector<ParamVector> captured_models(const ExperimentConfig& cfg) {
  std::vector<ParamVector> models;
  RunHooks hooks;
  hooks.on_global_model = [&](std::int64_t, const ParamVector& m) { models.push_back(m); };
  run_experiment(cfg, hooks);
  return models;
}

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("a degenerate band always samples its endpoint") {
  DelayModel model = DelayModel::evenly_assigned(4, {{0.0, 0.0}}, 1);
  for (int r = 0; r < 50; ++r) CHECK(model.sample_round_delay(2, r, 9) == 0.0);
}

TEST_CASE("band draws stay inside the band and repeat under the same key") {
  DelayModel model = DelayModel::evenly_assigned(4, {{20.0, 30.0}}, 1);
  for (int r = 0; r < 10000; ++r) {
    const double d = model.sample_round_delay(1, r, 7);
    CHECK(d >= 20.0);
    CHECK(d <= 30.0);
  }
  CHECK(model.sample_round_delay(1, 3, 7) == model.sample_round_delay(1, 3, 7));
  CHECK(model.sample_round_delay(1, 3, 7) != model.sample_round_delay(1, 4, 7));
}

TEST_CASE("even assignment splits 100 clients into 5 parts of 20") {
  DelayModel model = DelayModel::evenly_assigned(100, DelayModel::default_bands(), 2);
  std::vector<int> counts(5, 0);
  for (const int band : model.assignment) counts[static_cast<std::size_t>(band)] += 1;
  for (const int c : counts) CHECK(c == 20);
  const DelayModel again = DelayModel::evenly_assigned(100, DelayModel::default_bands(), 2);
  CHECK(model.assignment == again.assignment);
}

TEST_CASE("doubling the dataset doubles the compute component") {
  SolverConfig solver;
  solver.local_epochs = 3;
  solver.batch_size = 10;
  LatencyParams latency;
  latency.seconds_per_step = 0.05;
  const double small = client_response_latency(100, solver, latency, 0.0, 0, 0);
  const double large = client_response_latency(200, solver, latency, 0.0, 0, 0);
  CHECK(large == doctest::Approx(2.0 * small));
  CHECK(optimizer_steps_per_round(100, solver) == 30);
  CHECK(optimizer_steps_per_round(101, solver) == 33);  // partial batch counts
}

TEST_CASE("a delayed client is strictly slower than an undelayed twin") {
  SolverConfig solver;
  LatencyParams latency;
  CHECK(client_response_latency(50, solver, latency, 25.0, 100, 100) >
        client_response_latency(50, solver, latency, 0.0, 100, 100));
}

TEST_CASE("transfer time scales with payload size over bandwidth") {
  SolverConfig solver;
  solver.local_epochs = 1;
  solver.batch_size = 1;
  LatencyParams latency;
  latency.seconds_per_step = 0.0;
  latency.bandwidth_bytes_per_sec = 1000.0;
  CHECK(client_response_latency(1, solver, latency, 0.0, 500, 1500) ==
        doctest::Approx(2.0));
}

TEST_CASE("dropout schedules stay inside the first half of the horizon") {
  const DropoutSchedule s = DropoutSchedule::uniform_random(50, 10, 600.0, 3);
  CHECK(s.victims().size() == 10);
  for (const int v : s.victims()) {
    const double t = s.drop_time[static_cast<std::size_t>(v)];
    CHECK(t >= 0.0);
    CHECK(t <= 300.0);
    CHECK(s.alive(v, t - 1e-9));
    CHECK_FALSE(s.alive(v, t));
    CHECK_FALSE(s.alive(v, t + 1000.0));  // never comes back
  }
}

TEST_CASE("event ties dispatch by kind, then subject, then sequence") {
  EventQueue q;
  q.push({5.0, EventKind::TierComplete, 2, 0});
  q.push({5.0, EventKind::ClientFinish, 9, 1});
  q.push({5.0, EventKind::TierComplete, 1, 2});
  q.push({4.0, EventKind::Dropout, 0, 3});
  CHECK(q.top().kind == EventKind::Dropout);
  q.pop();
  CHECK(q.top().kind == EventKind::ClientFinish);
  q.pop();
  CHECK(q.top().subject == 1);
  q.pop();
  CHECK(q.top().subject == 2);
}

TEST_CASE("fedat with one tier reproduces fedavg bitwise") {
  ExperimentConfig fedat = tiny_config();
  fedat.method = Method::FedAt;
  ExperimentConfig fedavg = tiny_config();
  fedavg.method = Method::FedAvg;

  const auto a = captured_models(fedat);
  const auto b = captured_models(fedavg);
  REQUIRE(a.size() == 8);
  REQUIRE(b.size() == 8);
  for (std::size_t r = 0; r < a.size(); ++r) CHECK(bits_equal(a[r], b[r]));
}

TEST_CASE("tifl with one tier reproduces fedavg bitwise") {
  ExperimentConfig tifl = tiny_config();
  tifl.method = Method::TiFl;
  ExperimentConfig fedavg = tiny_config();
  fedavg.method = Method::FedAvg;

  const auto a = captured_models(tifl);
  const auto b = captured_models(fedavg);
  REQUIRE(a.size() == b.size());
  for (std::size_t r = 0; r < a.size(); ++r) CHECK(bits_equal(a[r], b[r]));
}

TEST_CASE("fedavg with full participation equals a centralized descent step") {
  ExperimentConfig cfg = tiny_config();
  cfg.method = Method::FedAvg;
  cfg.data.num_clients = 3;
  cfg.data.samples_per_client = 20;
  cfg.tiers = 1;
  cfg.sample_size = 3;
  cfg.solver.optimizer = OptimizerKind::GradientDescent;
  cfg.solver.local_epochs = 1;
  cfg.solver.batch_size = 1000;  // full batch
  cfg.round_budget = 1;

  const auto models = captured_models(cfg);
  REQUIRE(models.size() == 1);

  const FederatedDataset ds = generate(cfg.data, cfg.seed);
  LogisticModel model(cfg.data.feature_dim, cfg.data.num_classes);
  Examples pool;
  pool.feature_dim = ds.feature_dim;
  for (const auto& shard : ds.clients) {
    pool.features.insert(pool.features.end(), shard.train.features.begin(),
                         shard.train.features.end());
    pool.labels.insert(pool.labels.end(), shard.train.labels.begin(), shard.train.labels.end());
  }
  const ParamVector start = model.zeros();
  const ParamVector grad = proximal_gradient(model, start, {0.0, start}, pool);
  for (std::size_t i = 0; i < grad.values.size(); ++i) {
    const double expected = start.values[i] - cfg.solver.learning_rate * grad.values[i];
    CHECK(models[0].values[i] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("fedasync with alpha 1 tracks the single client's chain exactly") {
  ExperimentConfig cfg = tiny_config();
  cfg.method = Method::FedAsync;
  cfg.data.num_clients = 1;
  cfg.tiers = 1;
  cfg.sample_size = 1;
  cfg.fedasync_alpha = 1.0;
  cfg.round_budget = 3;

  const auto models = captured_models(cfg);
  REQUIRE(models.size() == 3);

  const RunSetup setup = build_setup(cfg);
  const Codec& codec = setup.codec;
  ParamVector global = setup.initial_model;
  for (std::int64_t r = 0; r < 3; ++r) {
    const ParamVector received = codec.decompress(codec.compress(global));
    const std::uint64_t train_seed =
        subseed(cfg.seed, StreamTag::kTrain, 0, static_cast<std::uint64_t>(r));
    const ParamVector trained =
        local_train(*setup.model, received, {cfg.lambda, received},
                    setup.dataset.clients[0].train, cfg.solver, train_seed);
    global = codec.decompress(codec.compress(trained));
    CHECK(bits_equal(models[static_cast<std::size_t>(r)], global));
  }
}

TEST_CASE("runs are byte-identical across repeats and thread counts") {
  ExperimentConfig cfg = tiny_config();
  cfg.method = Method::FedAt;
  cfg.tiers = 2;
  cfg.codec_precision = 4;
  cfg.delay_bands = {{0.0, 2.0}, {5.0, 9.0}};
  cfg.dropout_count = 2;
  cfg.round_budget = 30;
  cfg.time_budget_seconds = 500.0;

  const auto dir = std::filesystem::temp_directory_path();
  const auto path_a = dir / "fedsim_det_a.csv";
  const auto path_b = dir / "fedsim_det_b.csv";

  cfg.threads = 1;
  write_metrics_csv(run_experiment(cfg), path_a.string());
  cfg.threads = 4;
  write_metrics_csv(run_experiment(cfg), path_b.string());
  CHECK(file_bytes(path_a) == file_bytes(path_b));
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}

TEST_CASE("a zero round budget yields a header-only run") {
  ExperimentConfig cfg = tiny_config();
  cfg.round_budget = 0;
  cfg.time_budget_seconds = 100.0;
  const RunMetrics metrics = run_experiment(cfg);
  CHECK(metrics.events.empty());
  CHECK(metrics.info.num_clients == 8);
}

TEST_CASE("a faster tier aggregates proportionally more often") {
  ExperimentConfig cfg = tiny_config();
  cfg.method = Method::FedAt;
  cfg.data.num_clients = 10;
  cfg.data.samples_per_client = 20;
  cfg.solver.local_epochs = 1;
  cfg.tiers = 2;
  cfg.delay_bands = {{1.0, 1.0}, {3.0, 3.0}};
  cfg.latency.seconds_per_step = 1e-4;
  cfg.round_budget = 1000000;
  cfg.time_budget_seconds = 200.0;

  const RunMetrics metrics = run_experiment(cfg);
  REQUIRE(metrics.info.tier_update_counts.size() == 2);
  const double ratio = static_cast<double>(metrics.info.tier_update_counts[0]) /
                       static_cast<double>(metrics.info.tier_update_counts[1]);
  CHECK(ratio >= 2.0);
  CHECK(ratio <= 4.0);
  CHECK(metrics.info.tier_update_counts[0] >= metrics.info.tier_update_counts[1]);
}

TEST_CASE("dropped clients never finish after their drop time") {
  ExperimentConfig cfg = tiny_config();
  cfg.method = Method::FedAt;
  cfg.tiers = 2;
  cfg.delay_bands = {{0.0, 2.0}, {10.0, 20.0}};
  cfg.dropout_count = 3;
  cfg.round_budget = 200;
  cfg.time_budget_seconds = 300.0;

  EventTrace trace;
  RunHooks hooks;
  hooks.trace = &trace;
  const RunSetup setup = build_setup(cfg);
  run_simulation(setup, hooks);

  for (const auto& ev : trace.events()) {
    if (ev.kind == EventKind::ClientFinish) {
      CHECK(ev.time < setup.dropouts.drop_time[static_cast<std::size_t>(ev.subject)]);
    }
  }
  const auto ordered = trace.ordered();
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    CHECK(ordered[i - 1].time <= ordered[i].time);
  }
}

TEST_CASE("byte counters are cumulative and consistent across events") {
  ExperimentConfig cfg = tiny_config();
  cfg.codec_precision = 4;
  cfg.round_budget = 12;
  const RunMetrics metrics = run_experiment(cfg);
  REQUIRE(!metrics.events.empty());
  std::uint64_t prev_up = 0;
  std::uint64_t prev_down = 0;
  for (const auto& ev : metrics.events) {
    CHECK(ev.uplink_bytes_cum >= prev_up);
    CHECK(ev.downlink_bytes_cum >= prev_down);
    prev_up = ev.uplink_bytes_cum;
    prev_down = ev.downlink_bytes_cum;
    CHECK(ev.global_accuracy >= 0.0);
    CHECK(ev.global_accuracy <= 1.0);
  }
  CHECK(prev_up > 0);
  CHECK(prev_down > 0);
}

}  // TEST_SUITE
