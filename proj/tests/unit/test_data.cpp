#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "fedsim/data.hpp"
#include "fedsim/metrics.hpp"

using namespace fedsim;

namespace {

DataGenConfig small_config() {
  DataGenConfig cfg;
  cfg.num_classes = 10;
  cfg.feature_dim = 8;
  cfg.samples_per_client = 40;
  cfg.num_clients = 12;
  cfg.classes_per_client = 2;
  return cfg;
}

std::set<int> distinct_labels(const Examples& ex) {
  return {ex.labels.begin(), ex.labels.end()};
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("iid case: every client covers all classes") {
  DataGenConfig cfg = small_config();
  cfg.classes_per_client = cfg.num_classes;
  cfg.samples_per_client = 60;
  const FederatedDataset ds = generate(cfg, 1);
  for (const auto& shard : ds.clients) {
    CHECK(distinct_labels(shard.train).size() == static_cast<std::size_t>(cfg.num_classes));
  }
}

TEST_CASE("2-class regime: every shard holds exactly two distinct train labels") {
  const FederatedDataset ds = generate(small_config(), 2);
  for (const auto& shard : ds.clients) {
    CHECK(distinct_labels(shard.train).size() == 2);
  }
}

TEST_CASE("the label contract holds across classes_per_client values") {
  for (const int c : {1, 3, 5, 10}) {
    DataGenConfig cfg = small_config();
    cfg.classes_per_client = c;
    const FederatedDataset ds = generate(cfg, 3);
    for (const auto& shard : ds.clients) {
      CHECK(distinct_labels(shard.train).size() == static_cast<std::size_t>(c));
    }
  }
}

TEST_CASE("generation is deterministic under the seed") {
  const FederatedDataset a = generate(small_config(), 7);
  const FederatedDataset b = generate(small_config(), 7);
  CHECK(dataset_fingerprint(a) == dataset_fingerprint(b));
  REQUIRE(a.clients.size() == b.clients.size());
  for (std::size_t i = 0; i < a.clients.size(); ++i) {
    CHECK(a.clients[i].train.features == b.clients[i].train.features);
    CHECK(a.clients[i].test.labels == b.clients[i].test.labels);
  }
  const FederatedDataset c = generate(small_config(), 8);
  CHECK(dataset_fingerprint(a) != dataset_fingerprint(c));
}

TEST_CASE("shards are pairwise disjoint") {
  const FederatedDataset ds = generate(small_config(), 4);
  std::set<std::vector<double>> seen;
  std::size_t total = 0;
  for (const auto& shard : ds.clients) {
    for (const Examples* ex : {&shard.train, &shard.test}) {
      for (std::size_t i = 0; i < ex->size(); ++i) {
        const auto row = ex->row(i);
        seen.insert(std::vector<double>(row.begin(), row.end()));
        ++total;
      }
    }
  }
  CHECK(seen.size() == total);
}

TEST_CASE("80/20 split is exact up to floor rounding") {
  DataGenConfig cfg = small_config();
  cfg.samples_per_client = 200;
  const FederatedDataset ds = generate(cfg, 5);
  std::size_t train_total = 0;
  std::size_t test_total = 0;
  for (const auto& shard : ds.clients) {
    CHECK(shard.n_k == shard.train.size());
    train_total += shard.train.size();
    test_total += shard.test.size();
    // 200 samples, 2 classes -> 100 per class -> exact 80/20.
    CHECK(shard.train.size() == 160);
    CHECK(shard.test.size() == 40);
  }
  const std::size_t total = train_total + test_total;
  CHECK(test_total <= total / 5);
  CHECK(test_total >= total / 5 - ds.clients.size());
}

TEST_CASE("global test set concatenates client splits in id order") {
  const FederatedDataset ds = generate(small_config(), 6);
  const Examples global = global_test_set(ds);
  std::size_t expected = 0;
  for (const auto& shard : ds.clients) expected += shard.test.size();
  CHECK(global.size() == expected);
  // First client's block leads.
  const auto first = ds.clients.front().test.row(0);
  const auto head = global.row(0);
  CHECK(std::vector<double>(first.begin(), first.end()) ==
        std::vector<double>(head.begin(), head.end()));
}

TEST_CASE("infeasible partitions are rejected") {
  DataGenConfig cfg = small_config();
  cfg.classes_per_client = 11;
  CHECK_THROWS_AS(generate(cfg, 1), ConfigError);
  cfg = small_config();
  cfg.classes_per_client = 0;
  CHECK_THROWS_AS(generate(cfg, 1), ConfigError);
  cfg = small_config();
  cfg.samples_per_client = 1;
  cfg.classes_per_client = 2;
  CHECK_THROWS_AS(generate(cfg, 1), ConfigError);
}

TEST_CASE("sample skew varies client sizes but keeps every class block nonempty") {
  DataGenConfig cfg = small_config();
  cfg.sample_skew = 0.5;
  const FederatedDataset ds = generate(cfg, 9);
  bool any_differs = false;
  for (const auto& shard : ds.clients) {
    if (shard.train.size() + shard.test.size() !=
        static_cast<std::size_t>(cfg.samples_per_client)) {
      any_differs = true;
    }
    CHECK(distinct_labels(shard.train).size() == 2);
  }
  CHECK(any_differs);
}

TEST_CASE("dataset save/load round-trips byte-for-byte") {
  const FederatedDataset ds = generate(small_config(), 10);
  const auto path = std::filesystem::temp_directory_path() / "fedsim_test_dataset.json";
  save_dataset(ds, path.string());
  const FederatedDataset back = load_dataset(path.string());
  CHECK(back.num_classes == ds.num_classes);
  CHECK(back.feature_dim == ds.feature_dim);
  CHECK(back.seed == ds.seed);
  CHECK(dataset_fingerprint(back) == dataset_fingerprint(ds));
  REQUIRE(back.clients.size() == ds.clients.size());
  for (std::size_t i = 0; i < ds.clients.size(); ++i) {
    CHECK(back.clients[i].train.features == ds.clients[i].train.features);
    CHECK(back.clients[i].n_k == ds.clients[i].n_k);
  }
  std::filesystem::remove(path);
}

TEST_CASE("centralized logistic regression separates the default blobs") {
  DataGenConfig cfg;
  cfg.num_classes = 10;
  cfg.feature_dim = 32;
  cfg.samples_per_client = 200;
  cfg.num_clients = 20;
  cfg.classes_per_client = 2;
  const FederatedDataset ds = generate(cfg, 11);

  Examples pool;
  pool.feature_dim = ds.feature_dim;
  for (const auto& shard : ds.clients) {
    pool.features.insert(pool.features.end(), shard.train.features.begin(),
                         shard.train.features.end());
    pool.labels.insert(pool.labels.end(), shard.train.labels.begin(),
                       shard.train.labels.end());
  }

  LogisticModel model(cfg.feature_dim, cfg.num_classes);
  SolverConfig solver;
  solver.learning_rate = 0.05;
  solver.local_epochs = 5;
  solver.batch_size = 64;
  const ParamVector trained =
      local_train(model, model.zeros(), {0.0, model.zeros()}, pool, solver, 1);

  const Examples test = global_test_set(ds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (model.predict(trained, test.row(i)) == test.labels[i]) ++correct;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(test.size());
  CHECK(acc >= 0.90);
}

}  // TEST_SUITE
