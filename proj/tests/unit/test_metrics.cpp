#include <cmath>

#include "doctest.h"
#include "fedsim/metrics.hpp"

using namespace fedsim;

namespace {

std::vector<EventRecord> stream_from(const std::vector<double>& accuracies) {
  std::vector<EventRecord> events;
  for (std::size_t i = 0; i < accuracies.size(); ++i) {
    EventRecord ev;
    ev.event_index = static_cast<std::int64_t>(i);
    ev.sim_time = 10.0 * static_cast<double>(i + 1);
    ev.round = static_cast<std::int64_t>(i + 1);
    ev.global_accuracy = accuracies[i];
    ev.uplink_bytes_cum = 1000 * (i + 1);
    ev.downlink_bytes_cum = 500 * (i + 1);
    events.push_back(ev);
  }
  return events;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("a constant-prediction model scores the class floor on balanced data") {
  DataGenConfig cfg;
  cfg.num_classes = 10;
  cfg.feature_dim = 8;
  cfg.samples_per_client = 50;
  cfg.num_clients = 10;
  cfg.classes_per_client = 10;  // balanced everywhere
  const FederatedDataset ds = generate(cfg, 1);
  LogisticModel model(cfg.feature_dim, cfg.num_classes);
  ParamVector constant = model.zeros();
  constant.values[element_count(constant.shapes) - cfg.num_classes] = 100.0;  // bias class 0
  const Evaluation eval = evaluate_model(model, constant, ds);
  CHECK(eval.per_client.size() == 10);
  CHECK(eval.global_accuracy == doctest::Approx(0.1).epsilon(0.5));
}

TEST_CASE("population variance of (0.5, 0.7) is exactly 0.01") {
  const std::vector<double> v = {0.5, 0.7};
  CHECK(population_variance(v) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("variance skips excluded clients") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> v = {0.5, nan, 0.7, nan};
  CHECK(population_variance(v) == doctest::Approx(0.01).epsilon(1e-12));
  const std::vector<double> all_nan = {nan, nan};
  CHECK(std::isnan(population_variance(all_nan)));
}

TEST_CASE("excluded clients evaluate to NaN but keep the global set fixed") {
  DataGenConfig cfg;
  cfg.num_classes = 4;
  cfg.feature_dim = 4;
  cfg.samples_per_client = 20;
  cfg.num_clients = 4;
  cfg.classes_per_client = 2;
  const FederatedDataset ds = generate(cfg, 2);
  LogisticModel model(cfg.feature_dim, cfg.num_classes);
  std::vector<bool> excluded = {false, true, false, false};
  const Evaluation with = evaluate_model(model, model.zeros(), ds, &excluded);
  const Evaluation without = evaluate_model(model, model.zeros(), ds);
  CHECK(std::isnan(with.per_client[1]));
  CHECK_FALSE(std::isnan(with.per_client[0]));
  CHECK(with.global_accuracy == without.global_accuracy);
}

TEST_CASE("smoothed values exist only once a full window of 40 has formed") {
  std::vector<double> acc(50, 0.0);
  acc[0] = 1.0;
  const auto events = stream_from(acc);
  const auto smoothed = smoothed_accuracy(events);
  CHECK(std::isnan(smoothed[0]));
  CHECK(std::isnan(smoothed[38]));
  CHECK(smoothed[39] == doctest::Approx(1.0 / 40.0));
  CHECK(smoothed[40] == 0.0);  // the spike left the window
}

TEST_CASE("short streams still report a tail-mean final accuracy") {
  const auto events = stream_from(std::vector<double>{0.2, 0.4});
  CHECK(final_smoothed_accuracy(events) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(best_smoothed_accuracy(events) == doctest::Approx(0.3).epsilon(1e-12));
  // But a crossing needs a full window.
  CHECK_FALSE(time_to_accuracy(events, 0.25).reached);
}

TEST_CASE("a never-reaching stream reports not-reached") {
  const auto events = stream_from(std::vector<double>(60, 0.3));
  const Crossing c = time_to_accuracy(events, 0.5);
  CHECK_FALSE(c.reached);
  CHECK(c.event_index == -1);
}

TEST_CASE("a monotone stream crosses at the first smoothed crossing") {
  std::vector<double> acc;
  for (int i = 0; i < 100; ++i) acc.push_back(static_cast<double>(i) / 100.0);
  const auto events = stream_from(acc);
  const auto smoothed = smoothed_accuracy(events);
  const Crossing c = time_to_accuracy(events, 0.5);
  REQUIRE(c.reached);
  const auto k = static_cast<std::size_t>(c.event_index);
  CHECK(k >= 39);  // needs a full window
  CHECK(smoothed[k] >= 0.5);
  CHECK(smoothed[k - 1] < 0.5);
  CHECK(c.sim_time == events[k].sim_time);
}

TEST_CASE("a spike shorter than the window does not reach the target") {
  std::vector<double> acc(80, 0.1);
  for (int i = 35; i < 40; ++i) acc[static_cast<std::size_t>(i)] = 1.0;
  const auto events = stream_from(acc);
  CHECK_FALSE(time_to_accuracy(events, 0.5).reached);
  // The raw (unsmoothed) curve did cross; the smoothing is what rejects it.
  bool raw_crossed = false;
  for (const double a : acc) raw_crossed = raw_crossed || a >= 0.5;
  CHECK(raw_crossed);
}

TEST_CASE("byte crossing reports the counters at the crossing event") {
  std::vector<double> acc(50, 0.9);
  const auto events = stream_from(acc);
  const Crossing c = bytes_to_accuracy(events, 0.5);
  REQUIRE(c.reached);
  CHECK(c.event_index == 39);  // the first event with a full window
  CHECK(c.uplink_bytes == 40000);
  CHECK(c.downlink_bytes == 20000);
}

TEST_CASE("an empty stream reaches nothing") {
  const std::vector<EventRecord> events;
  CHECK_FALSE(time_to_accuracy(events, 0.5).reached);
  CHECK(std::isnan(final_smoothed_accuracy(events)));
}

TEST_CASE("final and best smoothed accuracy agree on a flat stream") {
  const auto events = stream_from(std::vector<double>(45, 0.625));
  CHECK(final_smoothed_accuracy(events) == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(best_smoothed_accuracy(events) == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("format_double is locale-independent shortest round-trip") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}

}  // TEST_SUITE
