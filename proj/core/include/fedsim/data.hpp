#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

struct DataGenConfig {
  int num_classes = 10;
  int feature_dim = 32;
  int samples_per_client = 200;
  int num_clients = 100;
  int classes_per_client = 2;
  /// Distance of class means from the origin (unit-variance blobs).
  double blob_scale = 4.0;
  /// 0 = equal n_k; f > 0 varies client sizes uniformly in [1-f, 1+f] * samples.
  double sample_skew = 0.0;

  void validate() const;
};

/// One client's shard: disjoint from every other client's, 80/20 train/test
/// split per class block so the train labels cover exactly classes_per_client
/// distinct classes.
struct ClientShard {
  int client_id = 0;
  Examples train;
  Examples test;
  std::size_t n_k = 0;  // train.size()
};

struct FederatedDataset {
  int num_classes = 0;
  int feature_dim = 0;
  std::uint64_t seed = 0;
  std::vector<ClientShard> clients;
};

/// Class-conditional Gaussian blobs partitioned by the sort-and-shard scheme:
/// client i holds the contiguous label block {i*c, ..., i*c + c - 1} (mod C).
/// Fully deterministic under the seed.
FederatedDataset generate(const DataGenConfig& cfg, std::uint64_t seed);

/// Concatenation of all client test splits in client_id order.
Examples global_test_set(const FederatedDataset& ds);

/// JSON export/import so runs are replayable byte-for-byte.
void save_dataset(const FederatedDataset& ds, const std::string& path);
FederatedDataset load_dataset(const std::string& path);

/// FNV-1a over the dataset content; used to check that compared runs saw the
/// same data.
std::uint64_t dataset_fingerprint(const FederatedDataset& ds);

}  // namespace fedsim
