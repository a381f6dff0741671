#include "fedsim/runner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

#include "fedsim/parallel.hpp"

namespace fedsim {
namespace {

constexpr double kQuietNaN = std::numeric_limits<double>::quiet_NaN();

struct ClientEnd {
  int client_id = 0;
  std::size_t n_k = 0;
  EncodedModel encoded;
  double finish_time = 0.0;
  double gamma = kAlreadyStationary;
  bool survived = false;
};

struct RoundOutcome {
  std::vector<ClientEnd> ends;  // in client_id order
  double completion_time = 0.0;
  bool any_survivor = false;
};

struct TimedBytes {
  double time = 0.0;
  std::uint64_t bytes = 0;
};

struct TimedBytesAfter {
  bool operator()(const TimedBytes& a, const TimedBytes& b) const { return a.time > b.time; }
};

using BytesQueue = std::priority_queue<TimedBytes, std::vector<TimedBytes>, TimedBytesAfter>;

class Runner {
 public:
  Runner(const RunSetup& setup, const RunHooks& hooks)
      : s_(setup), hooks_(hooks), num_clients_(setup.dataset.clients.size()) {}

  RunMetrics run() {
    validate_setup();
    out_.info.method = method_name(s_.method);
    out_.info.seed = s_.seed;
    out_.info.dataset_fingerprint = dataset_fingerprint(s_.dataset);
    out_.info.codec = s_.codec.describe();
    out_.info.resolved_config_json = s_.resolved_config_json;
    out_.info.tier_members = s_.tiers.members;
    out_.info.num_clients = num_clients_;

    if (hooks_.trace) {
      for (std::size_t c = 0; c < num_clients_; ++c) {
        const double t = s_.dropouts.drop_time[c];
        if (t != kNever) hooks_.trace->push(t, EventKind::Dropout, static_cast<int>(c));
      }
    }

    if (s_.round_budget > 0) {
      switch (s_.method) {
        case Method::FedAt: run_fedat(); break;
        case Method::FedAvg: run_fedavg(); break;
        case Method::TiFl: run_tifl(); break;
        case Method::FedAsync: run_fedasync(); break;
      }
    }
    return std::move(out_);
  }

 private:
  void validate_setup() {
    if (s_.dataset.clients.empty()) throw Error("run_simulation: empty dataset");
    if (!s_.model) throw Error("run_simulation: no model");
    s_.initial_model.require_consistent("run_simulation initial model");
    if (s_.initial_model.shapes != s_.model->shapes()) {
      throw ShapeError(shapes_to_string(s_.model->shapes()),
                       shapes_to_string(s_.initial_model.shapes), "run_simulation initial model");
    }
    if (s_.dropouts.drop_time.size() != num_clients_) {
      throw Error("run_simulation: dropout schedule does not cover all clients");
    }
    if (s_.delays.assignment.size() != num_clients_) {
      throw Error("run_simulation: delay model does not cover all clients");
    }
    std::size_t covered = 0;
    for (const auto& tier : s_.tiers.members) covered += tier.size();
    if (covered != num_clients_) {
      throw Error("run_simulation: tier table does not partition the clients");
    }
    if (s_.sample_size < 1) throw Error("run_simulation: sample size must be >= 1");
  }

  bool over_time(double t) const { return s_.time_budget > 0.0 && t > s_.time_budget; }

  std::vector<int> live_of(const std::vector<int>& members, double now) const {
    std::vector<int> live;
    live.reserve(members.size());
    for (const int c : members) {
      if (s_.dropouts.alive(c, now)) live.push_back(c);
    }
    return live;
  }

  std::vector<int> select_clients(const std::vector<int>& live, std::size_t group,
                                  std::int64_t round_idx) const {
    const std::size_t k = std::min<std::size_t>(s_.sample_size, live.size());
    Rng rng(subseed(s_.seed, StreamTag::kSelect, group, static_cast<std::uint64_t>(round_idx)));
    return sample_without_replacement(live, k, rng);
  }

  /// Trains every selected client from the decoded broadcast. Finish times,
  /// payloads and byte accounting are all derived here; mid-round dropouts are
  /// marked non-survivors and contribute neither an update nor uplink bytes.
  RoundOutcome train_round(const std::vector<int>& selected, const EncodedModel& broadcast,
                           const ParamVector& start_model, double start_time,
                           std::int64_t round_idx) {
    RoundOutcome outcome;
    outcome.ends.resize(selected.size());

    const std::size_t down_bytes = broadcast.accounted_bytes();
    for (std::size_t i = 0; i < selected.size(); ++i) {
      pending_down_.push({start_time, down_bytes});
    }
    const double down_secs = static_cast<double>(down_bytes) / s_.latency.bandwidth_bytes_per_sec;

    // The proximal constraint is part of the tiered method's local objective;
    // the plain baselines minimize their unmodified local loss.
    const double lambda = s_.method == Method::FedAt ? s_.lambda : 0.0;
    LocalObjectiveSpec spec{lambda, start_model};
    parallel_for(selected.size(), s_.threads, [&](std::size_t i) {
      const int client = selected[i];
      const auto& shard = s_.dataset.clients[static_cast<std::size_t>(client)];
      const std::uint64_t train_seed =
          subseed(s_.seed, StreamTag::kTrain, static_cast<std::uint64_t>(client),
                  static_cast<std::uint64_t>(round_idx));
      ClientEnd end;
      end.client_id = client;
      end.n_k = shard.n_k;
      ParamVector trained = local_train(*s_.model, start_model, spec, shard.train, s_.solver,
                                        train_seed);
      end.gamma = gamma_inexactness(*s_.model, start_model, trained, spec, shard.train);
      end.encoded = s_.codec.compress(trained);
      const double delay = s_.delays.sample_round_delay(client, round_idx, s_.seed);
      const double up_secs =
          static_cast<double>(end.encoded.accounted_bytes()) / s_.latency.bandwidth_bytes_per_sec;
      const double compute = s_.latency.seconds_per_step *
                             static_cast<double>(optimizer_steps_per_round(shard.n_k, s_.solver));
      end.finish_time = start_time + down_secs + compute + delay + up_secs;
      outcome.ends[i] = std::move(end);
    });

    double survivor_max = -1.0;
    double casualty_max = -1.0;
    for (auto& end : outcome.ends) {
      end.survived = s_.dropouts.alive(end.client_id, end.finish_time);
      if (end.survived) {
        pending_up_.push({end.finish_time, end.encoded.accounted_bytes()});
        if (hooks_.trace) hooks_.trace->push(end.finish_time, EventKind::ClientFinish, end.client_id);
        survivor_max = std::max(survivor_max, end.finish_time);
        outcome.any_survivor = true;
      } else {
        casualty_max =
            std::max(casualty_max, s_.dropouts.drop_time[static_cast<std::size_t>(end.client_id)]);
      }
    }
    // The round is timed by the slowest surviving client; if nobody survived,
    // the server moves on once the last selected client has died.
    outcome.completion_time = outcome.any_survivor ? survivor_max : casualty_max;
    return outcome;
  }

  void flush_bytes(double time) {
    while (!pending_up_.empty() && pending_up_.top().time <= time) {
      uplink_ += pending_up_.top().bytes;
      pending_up_.pop();
    }
    while (!pending_down_.empty() && pending_down_.top().time <= time) {
      downlink_ += pending_down_.top().bytes;
      pending_down_.pop();
    }
  }

  void note_aggregation(double time, int tier, const ParamVector& global,
                        const std::vector<ClientEnd>& ends) {
    if (hooks_.on_global_model) hooks_.on_global_model(round_, global);
    if (round_ % s_.eval_every != 0 && round_ != s_.round_budget) return;

    flush_bytes(time);
    EventRecord rec;
    rec.event_index = static_cast<std::int64_t>(out_.events.size());
    rec.sim_time = time;
    rec.round = round_;
    rec.tier = tier;

    std::vector<bool> excluded(num_clients_, false);
    for (std::size_t c = 0; c < num_clients_; ++c) {
      excluded[c] = !s_.dropouts.alive(static_cast<int>(c), time);
    }
    Evaluation eval = evaluate_model(*s_.model, global, s_.dataset, &excluded);
    rec.global_accuracy = eval.global_accuracy;
    rec.accuracy_variance = population_variance(eval.per_client);
    rec.per_client_accuracy = std::move(eval.per_client);
    rec.uplink_bytes_cum = uplink_;
    rec.downlink_bytes_cum = downlink_;

    double gamma_sum = 0.0;
    std::size_t gamma_n = 0;
    for (const auto& end : ends) {
      if (end.survived && end.gamma != kAlreadyStationary) {
        gamma_sum += end.gamma;
        ++gamma_n;
      }
    }
    rec.gamma_mean = gamma_n == 0 ? kQuietNaN : gamma_sum / static_cast<double>(gamma_n);
    out_.events.push_back(std::move(rec));
  }

  static std::vector<ClientUpdate> updates_of(std::vector<ClientEnd>& ends) {
    std::vector<ClientUpdate> updates;
    for (auto& end : ends) {
      if (end.survived) updates.push_back({end.client_id, end.n_k, std::move(end.encoded)});
    }
    return updates;
  }

  // --- FedAT: synchronous intra-tier rounds, asynchronous cross-tier updates.

  void run_fedat() {
    const std::size_t tier_count = s_.tiers.tier_count();
    ServerState state =
        ServerState::fresh(s_.tiers, s_.initial_model, s_.round_budget, s_.aggregation);

    EncodedModel broadcast = s_.codec.compress(s_.initial_model);
    ParamVector broadcast_decoded = s_.codec.decompress(broadcast);

    struct Pending {
      RoundOutcome outcome;
      std::int64_t tier_round = 0;
    };
    std::vector<std::optional<Pending>> pending(tier_count);
    EventQueue queue;
    std::uint64_t sequence = 0;

    auto start_tier_round = [&](std::size_t m, double now, std::int64_t tier_round) {
      const auto live = live_of(s_.tiers.members[m], now);
      if (live.empty()) return;  // dormant: every member has dropped
      const auto selected = select_clients(live, m, tier_round);
      Pending p;
      p.outcome = train_round(selected, broadcast, broadcast_decoded, now, tier_round);
      p.tier_round = tier_round;
      queue.push({p.outcome.completion_time, EventKind::TierComplete, static_cast<int>(m),
                  sequence++});
      pending[m] = std::move(p);
    };

    for (std::size_t m = 0; m < tier_count; ++m) start_tier_round(m, 0.0, 0);

    while (!queue.empty()) {
      const SimEvent ev = queue.top();
      queue.pop();
      if (over_time(ev.time)) break;
      if (round_ >= s_.round_budget) break;
      const auto m = static_cast<std::size_t>(ev.subject);
      Pending p = std::move(*pending[m]);
      pending[m].reset();
      if (hooks_.trace) hooks_.trace->push(ev.time, EventKind::TierComplete, ev.subject);

      if (!p.outcome.any_survivor) {
        // Every sampled client dropped mid-round; nothing to aggregate.
        start_tier_round(m, ev.time, p.tier_round + 1);
        continue;
      }

      TierRoundResult result{m, updates_of(p.outcome.ends), ev.time};
      auto next = fedat_on_tier_complete(state, result, s_.codec);
      if (!next.has_value()) break;  // round budget exhausted
      round_ = state.round;
      broadcast = std::move(next->encoded);
      broadcast_decoded = s_.codec.decompress(broadcast);
      note_aggregation(ev.time, static_cast<int>(m), next->global, p.outcome.ends);

      if (round_ < s_.round_budget) start_tier_round(m, ev.time, p.tier_round + 1);
    }
    out_.info.tier_update_counts = state.tiers.update_counts;
  }

  // --- FedAvg: one synchronous global round at a time, sampled from all
  // clients; the round is timed by its slowest surviving client.

  void run_fedavg() { run_synchronous(/*tiered=*/false); }

  // --- TiFL: FedAvg's aggregation, but each round samples inside one
  // uniformly chosen tier.

  void run_tifl() { run_synchronous(/*tiered=*/true); }

  void run_synchronous(bool tiered) {
    std::vector<int> everyone(num_clients_);
    for (std::size_t c = 0; c < num_clients_; ++c) everyone[c] = static_cast<int>(c);
    std::vector<std::int64_t> tier_counts(tiered ? s_.tiers.tier_count() : 0, 0);

    ParamVector global = s_.initial_model;
    EncodedModel broadcast = s_.codec.compress(global);
    ParamVector broadcast_decoded = s_.codec.decompress(broadcast);

    double clock = 0.0;
    std::int64_t round_idx = 0;
    while (round_ < s_.round_budget) {
      std::size_t group = 0;
      std::vector<int> live;
      if (tiered) {
        std::vector<std::size_t> candidates;
        for (std::size_t m = 0; m < s_.tiers.tier_count(); ++m) {
          if (!live_of(s_.tiers.members[m], clock).empty()) candidates.push_back(m);
        }
        if (candidates.empty()) break;
        Rng rng(subseed(s_.seed, StreamTag::kTierPick, static_cast<std::uint64_t>(round_idx)));
        group = candidates[rng.below(candidates.size())];
        live = live_of(s_.tiers.members[group], clock);
      } else {
        live = live_of(everyone, clock);
        if (live.empty()) break;
      }

      const auto selected = select_clients(live, group, round_idx);
      RoundOutcome outcome = train_round(selected, broadcast, broadcast_decoded, clock, round_idx);
      if (over_time(outcome.completion_time)) break;
      clock = outcome.completion_time;
      round_idx += 1;
      if (hooks_.trace) {
        hooks_.trace->push(clock, EventKind::TierComplete, static_cast<int>(group));
      }
      if (!outcome.any_survivor) continue;

      TierRoundResult result{group, updates_of(outcome.ends), clock};
      global = intra_tier_aggregate(result, s_.codec);
      round_ += 1;
      if (tiered) tier_counts[group] += 1;
      broadcast = s_.codec.compress(global);
      broadcast_decoded = s_.codec.decompress(broadcast);
      note_aggregation(clock, tiered ? static_cast<int>(group) : -1, global, outcome.ends);
    }
    if (tiered) out_.info.tier_update_counts = std::move(tier_counts);
  }

  // --- FedAsync: every client trains continuously; each arrival mixes into
  // the global model with weight alpha.

  void run_fedasync() {
    ParamVector global = s_.initial_model;
    EncodedModel broadcast = s_.codec.compress(global);
    ParamVector broadcast_decoded = s_.codec.decompress(broadcast);

    struct InFlight {
      ClientEnd end;
      std::int64_t started_round = 0;
      std::int64_t client_round = 0;
    };
    std::vector<std::optional<InFlight>> pending(num_clients_);
    EventQueue queue;
    std::uint64_t sequence = 0;

    auto schedule = [&](int client, double now, std::int64_t client_round) {
      if (!s_.dropouts.alive(client, now)) return;
      RoundOutcome outcome =
          train_round({client}, broadcast, broadcast_decoded, now, client_round);
      if (!outcome.any_survivor) return;  // will die before reporting back
      InFlight flight{std::move(outcome.ends.front()), round_, client_round};
      queue.push({flight.end.finish_time, EventKind::ClientFinish, client, sequence++});
      pending[static_cast<std::size_t>(client)] = std::move(flight);
    };

    for (std::size_t c = 0; c < num_clients_; ++c) schedule(static_cast<int>(c), 0.0, 0);

    while (!queue.empty()) {
      const SimEvent ev = queue.top();
      queue.pop();
      if (over_time(ev.time)) break;
      if (round_ >= s_.round_budget) break;
      const auto c = static_cast<std::size_t>(ev.subject);
      InFlight flight = std::move(*pending[c]);
      pending[c].reset();

      const std::int64_t staleness = round_ - flight.started_round;
      const double alpha =
          s_.fedasync_staleness_exponent == 0.0
              ? s_.fedasync_alpha
              : s_.fedasync_alpha *
                    std::pow(static_cast<double>(staleness + 1), -s_.fedasync_staleness_exponent);

      ParamVector client_model = s_.codec.decompress(flight.end.encoded);
      ParamVector mixed = scaled(global, 1.0 - alpha);
      add_scaled(mixed, client_model, alpha);
      global = std::move(mixed);
      round_ += 1;
      broadcast = s_.codec.compress(global);
      broadcast_decoded = s_.codec.decompress(broadcast);

      const std::vector<ClientEnd> ends_for_gamma{std::move(flight.end)};
      note_aggregation(ev.time, -1, global, ends_for_gamma);

      if (round_ < s_.round_budget) schedule(ev.subject, ev.time, flight.client_round + 1);
    }
  }

  const RunSetup& s_;
  const RunHooks& hooks_;
  std::size_t num_clients_;
  RunMetrics out_;
  BytesQueue pending_up_;
  BytesQueue pending_down_;
  std::uint64_t uplink_ = 0;
  std::uint64_t downlink_ = 0;
  std::int64_t round_ = 0;
};

}  // namespace

RunSetup build_setup(const ExperimentConfig& cfg, FederatedDataset dataset) {
  cfg.validate();
  const auto num_clients = static_cast<std::size_t>(cfg.data.num_clients);
  if (dataset.clients.size() != num_clients) {
    throw ConfigError("data.num_clients", "dataset has " + std::to_string(dataset.clients.size()) +
                                              " clients, config says " +
                                              std::to_string(num_clients));
  }
  if (dataset.feature_dim != cfg.data.feature_dim || dataset.num_classes != cfg.data.num_classes) {
    throw ConfigError("data", "dataset dimensions do not match the config");
  }

  RunSetup s;
  s.method = cfg.method;
  s.aggregation = cfg.aggregation;
  s.dataset = std::move(dataset);
  s.model = make_model(cfg);
  Rng init_rng(subseed(cfg.seed, StreamTag::kInitModel));
  s.initial_model = s.model->initial_params(init_rng);
  s.solver = cfg.solver;
  s.lambda = cfg.lambda;
  s.codec = cfg.codec_precision == 0 ? Codec::lossless() : Codec::polyline(cfg.codec_precision);
  s.delays = DelayModel::evenly_assigned(num_clients, cfg.delay_bands, cfg.seed);
  if (cfg.dropout_count == 0) {
    s.dropouts = DropoutSchedule::none(num_clients);
  } else {
    const double horizon = cfg.dropout_horizon_seconds > 0.0 ? cfg.dropout_horizon_seconds
                                                             : cfg.time_budget_seconds;
    s.dropouts = DropoutSchedule::uniform_random(num_clients, cfg.dropout_count, horizon,
                                                 cfg.seed);
  }
  s.latency = cfg.latency;

  const std::size_t nominal_bytes = s.codec.compress(s.initial_model).accounted_bytes();
  const std::uint64_t profile_seed = subseed(cfg.seed, StreamTag::kProfile);
  s.profile = profile_clients(num_clients, cfg.probe_rounds, [&](int client, int probe_round) {
    const double delay = s.delays.sample_round_delay(client, probe_round, profile_seed);
    return client_response_latency(s.dataset.clients[static_cast<std::size_t>(client)].n_k,
                                   cfg.solver, cfg.latency, delay, nominal_bytes, nominal_bytes);
  });
  s.tiers = partition_by_latency(s.profile, cfg.tiers);

  s.sample_size = cfg.sample_size;
  s.fedasync_alpha = cfg.fedasync_alpha;
  s.fedasync_staleness_exponent = cfg.fedasync_staleness_exponent;
  s.round_budget = cfg.round_budget;
  s.time_budget = cfg.time_budget_seconds;
  s.seed = cfg.seed;
  s.threads = cfg.threads;
  s.eval_every = cfg.eval_every;
  s.resolved_config_json = scenario_to_json(cfg);
  return s;
}

RunSetup build_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  FederatedDataset dataset = cfg.dataset_path.empty() ? generate(cfg.data, cfg.seed)
                                                      : load_dataset(cfg.dataset_path);
  return build_setup(cfg, std::move(dataset));
}

RunMetrics run_simulation(const RunSetup& setup, const RunHooks& hooks) {
  Runner runner(setup, hooks);
  return runner.run();
}

RunMetrics run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks) {
  const RunSetup setup = build_setup(cfg);
  return run_simulation(setup, hooks);
}

}  // namespace fedsim
