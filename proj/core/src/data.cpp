#include "fedsim/data.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace fedsim {
namespace {

using nlohmann::json;

std::vector<double> class_mean(int class_id, int feature_dim, double scale, std::uint64_t seed) {
  Rng rng(subseed(seed, StreamTag::kDataMeans, static_cast<std::uint64_t>(class_id)));
  std::vector<double> dir(static_cast<std::size_t>(feature_dim));
  double norm = 0.0;
  for (double& v : dir) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) norm = 1.0;
  for (double& v : dir) v = v / norm * scale;
  return dir;
}

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
}

json examples_to_json(const Examples& ex) {
  return json{{"features", ex.features}, {"labels", ex.labels}};
}

Examples examples_from_json(const json& j, int feature_dim) {
  Examples ex;
  ex.feature_dim = feature_dim;
  ex.features = j.at("features").get<std::vector<double>>();
  ex.labels = j.at("labels").get<std::vector<int>>();
  if (ex.features.size() != ex.labels.size() * static_cast<std::size_t>(feature_dim)) {
    throw Error("dataset file: feature array size does not match labels * feature_dim");
  }
  return ex;
}

}  // namespace

void DataGenConfig::validate() const {
  if (num_classes < 2) throw ConfigError("data.num_classes", "must be >= 2");
  if (feature_dim < 1) throw ConfigError("data.feature_dim", "must be >= 1");
  if (samples_per_client < 1) throw ConfigError("data.samples_per_client", "must be >= 1");
  if (num_clients < 1) throw ConfigError("data.num_clients", "must be >= 1");
  if (classes_per_client < 1 || classes_per_client > num_classes) {
    throw ConfigError("data.classes_per_client",
                      "must be in [1, num_classes]; partition is infeasible otherwise");
  }
  if (samples_per_client < classes_per_client) {
    throw ConfigError("data.samples_per_client",
                      "must be >= classes_per_client so every class block is nonempty");
  }
  if (!(blob_scale > 0.0)) throw ConfigError("data.blob_scale", "must be > 0");
  if (sample_skew < 0.0 || sample_skew >= 1.0) {
    throw ConfigError("data.sample_skew", "must be in [0, 1)");
  }
}

FederatedDataset generate(const DataGenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  FederatedDataset ds;
  ds.num_classes = cfg.num_classes;
  ds.feature_dim = cfg.feature_dim;
  ds.seed = seed;

  std::vector<std::vector<double>> means;
  means.reserve(static_cast<std::size_t>(cfg.num_classes));
  for (int c = 0; c < cfg.num_classes; ++c) {
    means.push_back(class_mean(c, cfg.feature_dim, cfg.blob_scale, seed));
  }

  const int c_per = cfg.classes_per_client;
  ds.clients.reserve(static_cast<std::size_t>(cfg.num_clients));
  for (int i = 0; i < cfg.num_clients; ++i) {
    ClientShard shard;
    shard.client_id = i;
    shard.train.feature_dim = cfg.feature_dim;
    shard.test.feature_dim = cfg.feature_dim;

    int samples = cfg.samples_per_client;
    if (cfg.sample_skew > 0.0) {
      Rng rng(subseed(seed, StreamTag::kDataSkew, static_cast<std::uint64_t>(i)));
      const double f = 1.0 + cfg.sample_skew * (2.0 * rng.uniform01() - 1.0);
      samples = std::max(c_per, static_cast<int>(std::lround(samples * f)));
    }

    // The client's contiguous label block; remainder samples go to the first
    // slots round-robin.
    std::vector<double> row(static_cast<std::size_t>(cfg.feature_dim));
    for (int slot = 0; slot < c_per; ++slot) {
      const int label = (i * c_per + slot) % cfg.num_classes;
      const int count = samples / c_per + (slot < samples % c_per ? 1 : 0);
      Rng rng(subseed(seed, StreamTag::kDataSamples, static_cast<std::uint64_t>(i),
                      static_cast<std::uint64_t>(slot)));
      const int test_count = count / 5;  // 20%, floor
      for (int s = 0; s < count; ++s) {
        const auto& mu = means[static_cast<std::size_t>(label)];
        for (int j = 0; j < cfg.feature_dim; ++j) {
          row[static_cast<std::size_t>(j)] = mu[static_cast<std::size_t>(j)] + rng.normal();
        }
        if (s < count - test_count) {
          shard.train.append(row, label);
        } else {
          shard.test.append(row, label);
        }
      }
    }
    shard.n_k = shard.train.size();
    ds.clients.push_back(std::move(shard));
  }
  return ds;
}

Examples global_test_set(const FederatedDataset& ds) {
  if (ds.clients.empty()) throw Error("global_test_set: empty dataset");
  Examples out;
  out.feature_dim = ds.feature_dim;
  for (const auto& shard : ds.clients) {
    out.features.insert(out.features.end(), shard.test.features.begin(),
                        shard.test.features.end());
    out.labels.insert(out.labels.end(), shard.test.labels.begin(), shard.test.labels.end());
  }
  return out;
}

void save_dataset(const FederatedDataset& ds, const std::string& path) {
  json j;
  j["num_classes"] = ds.num_classes;
  j["feature_dim"] = ds.feature_dim;
  j["seed"] = ds.seed;
  json clients = json::array();
  for (const auto& shard : ds.clients) {
    clients.push_back(json{{"client_id", shard.client_id},
                           {"train", examples_to_json(shard.train)},
                           {"test", examples_to_json(shard.test)}});
  }
  j["clients"] = std::move(clients);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_dataset: cannot open " + path);
  out << j.dump();
  if (!out) throw Error("save_dataset: write failed for " + path);
}

FederatedDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_dataset: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error("load_dataset: " + path + ": " + e.what());
  }
  FederatedDataset ds;
  ds.num_classes = j.at("num_classes").get<int>();
  ds.feature_dim = j.at("feature_dim").get<int>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& cj : j.at("clients")) {
    ClientShard shard;
    shard.client_id = cj.at("client_id").get<int>();
    shard.train = examples_from_json(cj.at("train"), ds.feature_dim);
    shard.test = examples_from_json(cj.at("test"), ds.feature_dim);
    shard.n_k = shard.train.size();
    ds.clients.push_back(std::move(shard));
  }
  return ds;
}

std::uint64_t dataset_fingerprint(const FederatedDataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix(h, static_cast<std::uint64_t>(ds.num_classes));
  fnv_mix(h, static_cast<std::uint64_t>(ds.feature_dim));
  for (const auto& shard : ds.clients) {
    fnv_mix(h, static_cast<std::uint64_t>(shard.client_id));
    for (const Examples* ex : {&shard.train, &shard.test}) {
      fnv_mix(h, ex->size());
      for (const int label : ex->labels) fnv_mix(h, static_cast<std::uint64_t>(label));
      for (const double v : ex->features) fnv_mix(h, std::bit_cast<std::uint64_t>(v));
    }
  }
  return h;
}

}  // namespace fedsim
