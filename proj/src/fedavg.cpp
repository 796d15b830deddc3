// SPDX-License-Identifier: Apache-2.0
#include "fedsim/fedavg.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "fedsim/rng.hpp"

namespace fedsim {

ClientUpdateResult client_update(const ModelSpec& spec, const ParamVector& w_r,
                                 const ClientDataset& client, const SamplingPolicy& policy,
                                 const LocalTraining& local, std::uint64_t round, std::uint64_t seed) {
  const BatchStream stream =
      sample_client_batchstream(client, policy, local.local_epochs, local.batch_size, round, seed);
  const SgdState sgd{local.client_lr};

  ParamVector w = w_r;
  double last_loss = 0.0;
  std::uint64_t step = 0;
  for (const auto& batch : stream.batches) {
    const NoiseKey key{seed, round, static_cast<std::uint64_t>(client.client_id), step};
    ParamVector noisy = fvn_perturb(w, local.fvn_std, key);
    const ParamVector g = gradient(spec, noisy, batch);
    if (step + 1 == stream.batches.size()) last_loss = loss(spec, noisy, batch);
    w = local.fvn_transient ? sgd_step(sgd, w, g) : sgd_step(sgd, noisy, g);
    ++step;
  }

  ClientUpdateResult result;
  result.client_id = client.client_id;
  result.delta = w_r - w;
  result.n_k_effective = stream.examples_used;
  result.n_k_full = client.n_k();
  result.local_steps = stream.batches.size();
  result.local_loss_final = last_loss;
  return result;
}

std::string_view to_string(AggregationWeighting weighting) {
  return weighting == AggregationWeighting::kEffective ? "effective" : "full";
}

AggregationWeighting parse_aggregation_weighting(std::string_view text) {
  if (text == "effective") return AggregationWeighting::kEffective;
  if (text == "full") return AggregationWeighting::kFull;
  throw std::invalid_argument("unknown aggregation weighting '" + std::string(text) +
                              "' (expected effective or full)");
}

namespace {

std::vector<const ClientUpdateResult*> sorted_by_client(std::span<const ClientUpdateResult> results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no client results");
  std::vector<const ClientUpdateResult*> order;
  order.reserve(results.size());
  for (const auto& r : results) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });
  return order;
}

std::vector<double> weights_in_order(const std::vector<const ClientUpdateResult*>& order,
                                     AggregationWeighting weighting) {
  std::vector<double> counts;
  counts.reserve(order.size());
  double total = 0.0;
  for (const auto* r : order) {
    const auto n = weighting == AggregationWeighting::kEffective ? r->n_k_effective : r->n_k_full;
    counts.push_back(static_cast<double>(n));
    total += static_cast<double>(n);
  }
  if (!(total > 0.0)) throw std::invalid_argument("aggregate: total example count is zero");
  for (double& c : counts) c /= total;
  return counts;
}

}  // namespace

std::vector<double> aggregation_weights(std::span<const ClientUpdateResult> results,
                                        AggregationWeighting weighting) {
  return weights_in_order(sorted_by_client(results), weighting);
}

ParamVector aggregate(std::span<const ClientUpdateResult> results, AggregationWeighting weighting) {
  const auto order = sorted_by_client(results);
  const auto weights = weights_in_order(order, weighting);
  ParamVector sum = ParamVector::zeros(order.front()->delta.dim());
  for (std::size_t i = 0; i < order.size(); ++i) {
    require_same_dim(sum, order[i]->delta, "aggregate");
    sum.axpy(weights[i], order[i]->delta);
  }
  return sum;
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "' (expected sgd or adam)");
}

ServerOptimizer ServerOptimizer::sgd(LrSchedule schedule) {
  return ServerOptimizer(OptimizerKind::kSgd, schedule);
}

ServerOptimizer ServerOptimizer::adam(LrSchedule schedule, double beta1, double beta2, double epsilon) {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be > 0");
  ServerOptimizer opt(OptimizerKind::kAdam, schedule);
  opt.adam_.beta1 = beta1;
  opt.adam_.beta2 = beta2;
  opt.adam_.epsilon = epsilon;
  return opt;
}

ParamVector ServerOptimizer::apply(const ParamVector& w, const ParamVector& g, std::size_t round) {
  const double rate = lr(round);
  if (kind_ == OptimizerKind::kSgd) return sgd_step(SgdState{rate}, w, g);
  adam_.lr = rate;
  auto [next_w, next_state] = adam_step(adam_, w, g);
  adam_ = std::move(next_state);
  return next_w;
}

ParamVector server_update(const ParamVector& w_r, const ParamVector& w_bar, ServerOptimizer& opt,
                          std::size_t round) {
  return opt.apply(w_r, w_bar, round);
}

FederatedEngine::FederatedEngine(ModelSpec spec, Population population, FederatedOptions options,
                                 ServerOptimizer server, ParamVector initial)
    : spec_(spec),
      population_(std::move(population)),
      options_(std::move(options)),
      server_(std::move(server)),
      weights_(std::move(initial)) {
  spec_.validate();
  if (weights_.dim() != param_count(spec_)) {
    throw std::invalid_argument("initial weights do not match the model parameter count");
  }
  const std::size_t k = options_.policy.clients_per_round;
  if (k == 0) throw std::invalid_argument("clients_per_round must be >= 1");
  if (options_.policy.mode == SamplingMode::kNonIid && k > population_.num_clients()) {
    throw std::invalid_argument("clients_per_round K=" + std::to_string(k) +
                                " exceeds population size M=" + std::to_string(population_.num_clients()));
  }
  if (options_.policy.mode == SamplingMode::kIid &&
      (options_.shard_size == 0 || k * options_.shard_size > population_.total_n())) {
    throw std::invalid_argument("IID arm needs 1 <= K*shard_size <= total examples");
  }
  options_.fvn.validate();
  options_.cost.validate();
}

std::vector<ClientUpdateResult> FederatedEngine::run_clients(
    const std::vector<const ClientDataset*>& clients, const LocalTraining& local,
    std::size_t round) const {
  std::vector<ClientUpdateResult> results(clients.size());
  std::vector<std::exception_ptr> errors(clients.size());
  auto work = [&](std::size_t i) {
    try {
      results[i] = client_update(spec_, weights_, *clients[i], options_.policy, local, round, options_.seed);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(options_.threads, 1), clients.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < clients.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < clients.size(); i = next.fetch_add(1)) work(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

RoundReport FederatedEngine::run_round(std::size_t round) {
  const std::size_t k = options_.policy.clients_per_round;
  std::vector<ClientDataset> shards;
  std::vector<const ClientDataset*> participants;
  if (options_.policy.mode == SamplingMode::kIid) {
    shards = make_iid_shards(population_, k, options_.shard_size, round, options_.seed);
    for (const auto& s : shards) participants.push_back(&s);
  } else {
    for (int id : select_clients(population_, k, round, options_.seed)) {
      participants.push_back(&population_.clients[static_cast<std::size_t>(id)]);
    }
  }

  LocalTraining local;
  local.local_epochs = options_.local_epochs;
  local.batch_size = options_.batch_size;
  local.client_lr = options_.client_lr;
  local.fvn_std = fvn_std_at(options_.fvn, round);
  local.fvn_transient = options_.fvn.transient;

  std::vector<ClientUpdateResult> results = run_clients(participants, local, round);
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });

  const ParamVector w_bar = aggregate(results, options_.weighting);

  RoundReport report;
  report.round = round;
  report.lr_server = server_.lr(round);
  report.fvn_std = local.fvn_std;
  report.aggregate_norm = w_bar.norm();

  double steps = 0.0;
  double client_loss = 0.0;
  for (const auto& r : results) {
    report.selected.push_back(r.client_id);
    report.local_steps.push_back(r.local_steps);
    steps += static_cast<double>(r.local_steps);
    client_loss += r.local_loss_final;
  }
  report.mu_actual = steps / static_cast<double>(results.size());
  report.mean_client_loss = client_loss / static_cast<double>(results.size());

  weights_ = server_update(weights_, w_bar, server_, round);
  ledger_ = ledger_accrue(ledger_, results.size(), report.mu_actual, options_.cost);
  report.cfmq_cumulative = ledger_.cfmq_bytes;
  return report;
}

CentralizedResult train_centralized(const ModelSpec& spec, std::span<const Example> data,
                                    ParamVector initial, ServerOptimizer optimizer,
                                    const CentralizedOptions& options, const StepObserver& observer) {
  if (options.steps == 0) throw std::invalid_argument("train_centralized: steps must be >= 1");
  if (options.batch_size == 0) throw std::invalid_argument("train_centralized: batch_size must be >= 1");
  if (data.empty()) throw std::invalid_argument("train_centralized: no training data");
  options.noise.validate();

  const std::size_t n = data.size();
  const std::size_t per_epoch = (n + options.batch_size - 1) / options.batch_size;
  std::vector<std::size_t> order(n);

  CentralizedResult result;
  result.weights = std::move(initial);
  result.loss_trace.reserve(options.steps);
  std::vector<Example> batch;
  for (std::size_t step = 0; step < options.steps; ++step) {
    const std::size_t epoch = step / per_epoch;
    const std::size_t slot = step % per_epoch;
    if (slot == 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng::Stream(options.seed, rng::Purpose::kCentralized, epoch).shuffle(order);
    }
    const std::size_t start = slot * options.batch_size;
    const std::size_t stop = std::min(n, start + options.batch_size);
    batch.clear();
    for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);

    const double noise_std = fvn_std_at(options.noise, step);
    ParamVector noisy = fvn_perturb(result.weights, noise_std, NoiseKey{options.seed, step, 0, 0});
    const ParamVector g = gradient(spec, noisy, batch);
    result.loss_trace.push_back(loss(spec, noisy, batch));
    result.weights = optimizer.apply(options.noise.transient ? result.weights : noisy, g, step);
    if (observer) observer(step + 1, result.weights);
  }
  return result;
}

}  // namespace fedsim
