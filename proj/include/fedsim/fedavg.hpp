// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/cost.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/optim.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

/// Local optimization settings shared by every client in a round.
struct LocalTraining {
  std::size_t local_epochs = 1;
  std::size_t batch_size = 8;
  double client_lr = 0.008;
  double fvn_std = 0.0;
  bool fvn_transient = true;
};

struct ClientUpdateResult {
  int client_id = 0;
  ParamVector delta;                 // w_r - w_hat
  std::size_t n_k_effective = 0;     // examples drawn this round
  std::size_t n_k_full = 0;          // client dataset size
  std::size_t local_steps = 0;       // batches consumed
  double local_loss_final = 0.0;     // loss of the last batch at the weights it was evaluated on
};

/// Runs local SGD from `w_r` over the client's batch stream for `round`.
/// Noise for local step s is keyed by (seed, round, client_id, s).
ClientUpdateResult client_update(const ModelSpec& spec, const ParamVector& w_r,
                                 const ClientDataset& client, const SamplingPolicy& policy,
                                 const LocalTraining& local, std::uint64_t round, std::uint64_t seed);

enum class AggregationWeighting { kEffective, kFull };

std::string_view to_string(AggregationWeighting weighting);
AggregationWeighting parse_aggregation_weighting(std::string_view text);

/// n_k / n for each result, in ascending client_id order.
std::vector<double> aggregation_weights(std::span<const ClientUpdateResult> results,
                                        AggregationWeighting weighting = AggregationWeighting::kEffective);

/// Weighted average of the client deltas. Terms are summed in ascending
/// client_id order whatever order the results arrive in.
ParamVector aggregate(std::span<const ClientUpdateResult> results,
                      AggregationWeighting weighting = AggregationWeighting::kEffective);

enum class OptimizerKind { kSgd, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view text);

/// Optimizer of the global model. In federated runs the "gradient" is the
/// aggregated delta; centralized training feeds it true batch gradients.
/// SGD applies w - lr(round) * g; Adam runs one adam_step with lr(round).
class ServerOptimizer {
 public:
  static ServerOptimizer sgd(LrSchedule schedule);
  static ServerOptimizer adam(LrSchedule schedule, double beta1 = 0.9, double beta2 = 0.999,
                              double epsilon = 1e-8);

  ParamVector apply(const ParamVector& w, const ParamVector& g, std::size_t round);
  double lr(std::size_t round) const { return lr_at(schedule_, round); }

  OptimizerKind kind() const noexcept { return kind_; }
  const AdamState& adam_state() const noexcept { return adam_; }

 private:
  ServerOptimizer(OptimizerKind kind, LrSchedule schedule) : kind_(kind), schedule_(schedule) {}

  OptimizerKind kind_;
  LrSchedule schedule_;
  AdamState adam_;
};

ParamVector server_update(const ParamVector& w_r, const ParamVector& w_bar, ServerOptimizer& opt,
                          std::size_t round);

struct FederatedOptions {
  SamplingPolicy policy;
  std::size_t shard_size = 0;  // IID arm only
  std::size_t local_epochs = 1;
  std::size_t batch_size = 8;
  double client_lr = 0.008;
  FvnConfig fvn;
  AggregationWeighting weighting = AggregationWeighting::kEffective;
  CostConstants cost;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct RoundReport {
  std::size_t round = 0;
  std::vector<int> selected;             // ascending client_id
  std::vector<std::size_t> local_steps;  // aligned with `selected`
  double aggregate_norm = 0.0;
  double mean_client_loss = 0.0;
  double lr_server = 0.0;
  double fvn_std = 0.0;
  double mu_actual = 0.0;
  double cfmq_cumulative = 0.0;  // bytes

  friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

/// Round loop: select clients (or draw IID shards), run client updates,
/// aggregate, apply the server optimizer and accrue CFMQ. Client updates may
/// run on several threads; results do not depend on the thread count.
class FederatedEngine {
 public:
  FederatedEngine(ModelSpec spec, Population population, FederatedOptions options,
                  ServerOptimizer server, ParamVector initial);

  RoundReport run_round(std::size_t round);

  const ParamVector& weights() const noexcept { return weights_; }
  const CostLedger& ledger() const noexcept { return ledger_; }
  const Population& population() const noexcept { return population_; }
  const ModelSpec& spec() const noexcept { return spec_; }

 private:
  std::vector<ClientUpdateResult> run_clients(const std::vector<const ClientDataset*>& clients,
                                              const LocalTraining& local, std::size_t round) const;

  ModelSpec spec_;
  Population population_;
  FederatedOptions options_;
  ServerOptimizer server_;
  ParamVector weights_;
  CostLedger ledger_;
};

struct CentralizedOptions {
  std::size_t batch_size = 8;
  std::size_t steps = 1;
  FvnConfig noise;  // single noise stream, scheduled per step
  std::uint64_t seed = 0;
};

struct CentralizedResult {
  ParamVector weights;
  std::vector<double> loss_trace;  // batch loss per step
};

/// Called after every step with (completed steps, weights).
using StepObserver = std::function<void(std::size_t, const ParamVector&)>;

/// Mini-batch training on pooled data, reshuffled every epoch.
CentralizedResult train_centralized(const ModelSpec& spec, std::span<const Example> data,
                                    ParamVector initial, ServerOptimizer optimizer,
                                    const CentralizedOptions& options,
                                    const StepObserver& observer = {});

}  // namespace fedsim
