#include "fedsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace fedsim {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double accuracy_on(const Model& model, const ParamVector& params, const Examples& test,
                   std::size_t& correct_out) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (model.predict(params, test.row(i)) == test.labels[i]) ++correct;
  }
  correct_out = correct;
  return test.empty() ? kNaN : static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

Evaluation evaluate_model(const Model& model, const ParamVector& params,
                          const FederatedDataset& ds, const std::vector<bool>* excluded) {
  Evaluation eval;
  eval.per_client.resize(ds.clients.size(), kNaN);
  std::size_t total = 0;
  std::size_t total_correct = 0;
  for (std::size_t c = 0; c < ds.clients.size(); ++c) {
    const auto& shard = ds.clients[c];
    std::size_t correct = 0;
    const double acc = accuracy_on(model, params, shard.test, correct);
    total += shard.test.size();
    total_correct += correct;
    const bool is_excluded = excluded != nullptr && (*excluded)[c];
    if (!is_excluded) eval.per_client[c] = acc;
  }
  eval.global_accuracy =
      total == 0 ? kNaN : static_cast<double>(total_correct) / static_cast<double>(total);
  return eval;
}

double population_variance(std::span<const double> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  if (n == 0) return kNaN;
  const double mean = sum / static_cast<double>(n);
  double acc = 0.0;
  for (const double v : values) {
    if (std::isnan(v)) continue;
    const double d = v - mean;
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

std::vector<double> smoothed_accuracy(std::span<const EventRecord> events) {
  std::vector<double> out(events.size(), kNaN);
  double window_sum = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    window_sum += events[i].global_accuracy;
    if (i >= static_cast<std::size_t>(kSmoothingWindow)) {
      window_sum -= events[i - kSmoothingWindow].global_accuracy;
    }
    if (i + 1 >= static_cast<std::size_t>(kSmoothingWindow)) {
      out[i] = window_sum / static_cast<double>(kSmoothingWindow);
    }
  }
  return out;
}

static double tail_mean_accuracy(std::span<const EventRecord> events) {
  if (events.empty()) return kNaN;
  const std::size_t width = std::min<std::size_t>(events.size(), kSmoothingWindow);
  double sum = 0.0;
  for (std::size_t i = events.size() - width; i < events.size(); ++i) {
    sum += events[i].global_accuracy;
  }
  return sum / static_cast<double>(width);
}

double final_smoothed_accuracy(std::span<const EventRecord> events) {
  return tail_mean_accuracy(events);
}

double best_smoothed_accuracy(std::span<const EventRecord> events) {
  if (events.empty()) return kNaN;
  const auto smoothed = smoothed_accuracy(events);
  double best = kNaN;
  for (const double v : smoothed) {
    if (!std::isnan(v) && (std::isnan(best) || v > best)) best = v;
  }
  // Streams shorter than a window never formed a smoothed value.
  if (std::isnan(best)) return tail_mean_accuracy(events);
  return best;
}

Crossing time_to_accuracy(std::span<const EventRecord> events, double target) {
  Crossing crossing;
  const auto smoothed = smoothed_accuracy(events);
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!std::isnan(smoothed[i]) && smoothed[i] >= target) {
      crossing.reached = true;
      crossing.event_index = events[i].event_index;
      crossing.sim_time = events[i].sim_time;
      crossing.uplink_bytes = events[i].uplink_bytes_cum;
      crossing.downlink_bytes = events[i].downlink_bytes_cum;
      return crossing;
    }
  }
  return crossing;
}

Crossing bytes_to_accuracy(std::span<const EventRecord> events, double target) {
  return time_to_accuracy(events, target);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

void write_metrics_csv(const RunMetrics& metrics, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_metrics_csv: cannot open " + path);

  out << "# fedsim-metrics v1\n";
  out << "# method=" << metrics.info.method << " seed=" << metrics.info.seed << " codec="
      << metrics.info.codec << " dataset_fingerprint=" << std::hex
      << metrics.info.dataset_fingerprint << std::dec << "\n";
  out << "# tiers=";
  for (std::size_t m = 0; m < metrics.info.tier_members.size(); ++m) {
    out << (m == 0 ? "" : ",") << metrics.info.tier_members[m].size();
  }
  out << "\n";
  if (!metrics.info.resolved_config_json.empty()) {
    out << "# config=" << metrics.info.resolved_config_json << "\n";
  }

  out << "event,sim_time,round,tier,global_accuracy,accuracy_variance,uplink_bytes,"
         "downlink_bytes,gamma_mean";
  for (std::size_t c = 0; c < metrics.info.num_clients; ++c) out << ",acc_client_" << c;
  out << "\n";

  for (const auto& ev : metrics.events) {
    out << ev.event_index << ',' << format_double(ev.sim_time) << ',' << ev.round << ','
        << ev.tier << ',' << format_double(ev.global_accuracy) << ','
        << format_double(ev.accuracy_variance) << ',' << ev.uplink_bytes_cum << ','
        << ev.downlink_bytes_cum << ',' << format_double(ev.gamma_mean);
    for (const double acc : ev.per_client_accuracy) {
      out << ',';
      if (!std::isnan(acc)) out << format_double(acc);
    }
    out << "\n";
  }
  if (!out) throw Error("write_metrics_csv: write failed for " + path);
}

void write_summary_json(const RunMetrics& metrics, std::span<const double> targets,
                        const std::string& path) {
  using nlohmann::json;
  json j;
  j["fedsim_summary_version"] = 1;
  j["method"] = metrics.info.method;
  j["seed"] = metrics.info.seed;
  j["codec"] = metrics.info.codec;
  {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(metrics.info.dataset_fingerprint));
    j["dataset_fingerprint"] = std::string(buffer);
  }
  if (!metrics.info.resolved_config_json.empty()) {
    j["config"] = json::parse(metrics.info.resolved_config_json);
  }
  json tiers = json::array();
  for (const auto& members : metrics.info.tier_members) tiers.push_back(members);
  j["tiers"] = std::move(tiers);
  if (!metrics.info.tier_update_counts.empty()) {
    j["tier_update_counts"] = metrics.info.tier_update_counts;
  }

  j["events"] = metrics.events.size();
  const auto& events = metrics.events;
  if (!events.empty()) {
    const auto& last = events.back();
    j["final_sim_time"] = last.sim_time;
    j["final_round"] = last.round;
    j["final_accuracy"] = last.global_accuracy;
    j["final_smoothed_accuracy"] = final_smoothed_accuracy(events);
    j["best_smoothed_accuracy"] = best_smoothed_accuracy(events);
    j["final_accuracy_variance"] = last.accuracy_variance;
    j["final_uplink_bytes"] = last.uplink_bytes_cum;
    j["final_downlink_bytes"] = last.downlink_bytes_cum;
    double gamma_sum = 0.0;
    std::size_t gamma_n = 0;
    for (const auto& ev : events) {
      if (!std::isnan(ev.gamma_mean)) {
        gamma_sum += ev.gamma_mean;
        ++gamma_n;
      }
    }
    j["mean_gamma"] = gamma_n == 0 ? json() : json(gamma_sum / static_cast<double>(gamma_n));
  }

  json jt = json::array();
  for (const double target : targets) {
    const Crossing crossing = time_to_accuracy(events, target);
    json entry;
    entry["target"] = target;
    entry["reached"] = crossing.reached;
    if (crossing.reached) {
      entry["event"] = crossing.event_index;
      entry["sim_time"] = crossing.sim_time;
      entry["uplink_bytes"] = crossing.uplink_bytes;
      entry["downlink_bytes"] = crossing.downlink_bytes;
    }
    jt.push_back(std::move(entry));
  }
  j["targets"] = std::move(jt);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_summary_json: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw Error("write_summary_json: write failed for " + path);
}

}  // namespace fedsim
