// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

struct ClientDataset {
  int client_id = 0;
  std::vector<Example> examples;

  std::size_t n_k() const noexcept { return examples.size(); }
};

/// Training clients plus the pooled held-out evaluation split.
struct Population {
  std::vector<ClientDataset> clients;
  std::vector<Example> held_out;
  std::size_t feature_dim = 0;

  std::size_t num_clients() const noexcept { return clients.size(); }
  std::size_t total_n() const noexcept;
  std::vector<Example> pooled() const;
};

struct LognormalCounts {
  double mu = 3.0;
  double sigma = 0.8;
  friend bool operator==(const LognormalCounts&, const LognormalCounts&) = default;
};

struct FixedCounts {
  std::size_t n = 1;
  friend bool operator==(const FixedCounts&, const FixedCounts&) = default;
};

using CountDistribution = std::variant<LognormalCounts, FixedCounts>;

/// Synthetic "speaker" population. Each client owns a Gaussian feature cluster
/// centred at center_scale * N(0, I) with per-example spread cluster_spread.
/// Labels come from a single teacher shared by all clients: class labels are
/// sampled from softmax(label_sharpness * teacher logits), regression targets
/// are teacher output plus N(0, 1/label_sharpness^2) noise. The teacher is
/// linear when teacher_hidden == 0, otherwise a random one-hidden-layer tanh
/// network, which a linear student can only fit locally.
struct PopulationParams {
  std::size_t num_clients = 200;
  CountDistribution counts = LognormalCounts{};
  double cluster_spread = 0.5;
  double center_scale = 1.0;
  std::size_t feature_dim = 2;
  std::size_t num_classes = 2;
  double label_sharpness = 4.0;
  std::size_t teacher_hidden = 0;
  /// Held-out examples per client, as a fraction of its training count (rounded).
  double eval_fraction = 0.1;

  void validate() const;
  friend bool operator==(const PopulationParams&, const PopulationParams&) = default;
};

Population generate_population(const PopulationParams& params, std::uint64_t seed);

enum class SamplingMode { kIid, kNonIid };

struct SamplingPolicy {
  SamplingMode mode = SamplingMode::kNonIid;
  std::optional<std::size_t> data_limit;
  std::size_t clients_per_round = 128;

  friend bool operator==(const SamplingPolicy&, const SamplingPolicy&) = default;
};

/// K distinct client ids drawn uniformly without replacement from 0..M-1.
std::vector<int> select_clients(std::size_t num_clients, std::size_t k, std::uint64_t round,
                                std::uint64_t seed);
std::vector<int> select_clients(const Population& pop, std::size_t k, std::uint64_t round,
                                std::uint64_t seed);

struct BatchStream {
  std::vector<std::vector<Example>> batches;
  /// Distinct examples drawn for this round, min(data_limit, n_k).
  std::size_t examples_used = 0;
};

/// Local data for one client in one round: an optional fresh data-limit draw,
/// then `local_epochs` reshuffled passes cut into batches of at most
/// `batch_size` (the last batch of an epoch may be short).
BatchStream sample_client_batchstream(const ClientDataset& client, const SamplingPolicy& policy,
                                      std::size_t local_epochs, std::size_t batch_size,
                                      std::uint64_t round, std::uint64_t seed);

/// K disjoint uniform shards of `shard_size` examples from the pooled
/// population. Shard k carries client_id k.
std::vector<ClientDataset> make_iid_shards(const Population& pop, std::size_t k,
                                           std::size_t shard_size, std::uint64_t round,
                                           std::uint64_t seed);

/// Line-oriented text dump: "num_clients feature_dim" header, then one
/// "client_id f1 ... fd label" line per training example.
void write_population(const Population& pop, std::ostream& out);
Population read_population(std::istream& in);

}  // namespace fedsim
