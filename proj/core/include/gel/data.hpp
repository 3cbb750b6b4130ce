#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gel/models.hpp"
#include "gel/numeric.hpp"

namespace gel {

struct DatasetStats {
  std::size_t clients = 0;
  std::size_t total_samples = 0;
  // Median per-client sample count (train + test). For an even number of
  // clients the lower of the two middle values is used so it stays integral.
  std::size_t median_client_samples = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct FederatedDataset {
  std::vector<ClientShard> shards;
  std::size_t feature_dim = 0;
  std::size_t classes = 0;
  double test_fraction = 0.2;
  DatasetStats stats;

  std::size_t num_clients() const noexcept { return shards.size(); }
  friend bool operator==(const FederatedDataset&, const FederatedDataset&) = default;
};

DatasetStats compute_stats(const std::vector<ClientShard>& shards);

// Throws DomainError if any shard is empty or the stored stats are stale.
void validate(const FederatedDataset& dataset);

// Parameters of the synthetic(alpha, beta) generator.
//
// For client k:
//   u_k ~ N(0, alpha^2), B_k ~ N(0, beta^2)
//   W_k ~ N(u_k, 1) of shape d x classes, b_k ~ N(u_k, 1)
//   v_k[j] ~ N(B_k, 1)
//   x ~ N(v_k, diag(j^-1.2)) for j = 1..d
//   y = argmax(W_k^T x + b_k)
//   n_k = max(min_samples, round(lognormal(ln(2 min_samples), 1)))
// alpha and beta are standard deviations, so alpha = beta = 0 removes the
// per-client shift of the model and feature means.
struct SyntheticConfig {
  std::size_t num_clients = 100;
  double alpha = 1.0;
  double beta = 1.0;
  std::size_t feature_dim = 20;
  std::size_t classes = 5;
  std::size_t min_samples = 10;
  double test_fraction = 0.2;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

// Non-IID synthetic federated benchmark. Each client's samples are split
// at random: floor(test_fraction * n_k) go to test, the rest to train.
FederatedDataset generate_synthetic(const SyntheticConfig& config, RngStream& stream);

// Pools every sample, shuffles, and redeals to the same number of clients
// with sizes differing by at most one. Each new shard is split again with
// the dataset's test fraction.
FederatedDataset partition_iid(const FederatedDataset& dataset, RngStream& stream);

// B rows drawn uniformly with replacement from the shard's train split.
Batch sample_batch(const ClientShard& shard, std::size_t batch_size, RngStream& stream);

// ceil(n_m / B) where n_m is the median client sample count.
std::size_t median_client_steps(const FederatedDataset& dataset, std::size_t batch_size);
std::size_t median_client_steps(std::size_t median_samples, std::size_t batch_size);

// Text table export: <stem>.csv holds one row per sample
//   client_id,split,sample_id,label,x0,...,x{d-1}
// with shortest round-trip decimal doubles, and <stem>.json holds
// feature_dim, classes, test_fraction, stats and free-form metadata.
// Import reproduces the exported dataset bit for bit.
void export_dataset(const FederatedDataset& dataset, const std::filesystem::path& stem,
                    const std::string& metadata_json = "{}");
FederatedDataset import_dataset(const std::filesystem::path& stem);

}  // namespace gel
