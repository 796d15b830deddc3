// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "fedsim/cost.hpp"
#include "fedsim/data.hpp"
#include "fedsim/fedavg.hpp"
#include "fedsim/model.hpp"
#include "fedsim/optim.hpp"

namespace fedsim {

enum class RunMode { kFederated, kCentralized };

std::string_view to_string(RunMode mode);
std::string_view to_string(SamplingMode mode);

struct ServerConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  LrSchedule schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const ServerConfig&, const ServerConfig&) = default;
};

/// Either explicit P / nu, or a model size the defaults are derived from.
/// With neither set the model size is 8 bytes per parameter.
struct CostConfig {
  std::optional<double> model_bytes;
  std::optional<double> payload_bytes;
  std::optional<double> peak_mem_bytes;
  double alpha = 1.0;

  friend bool operator==(const CostConfig&, const CostConfig&) = default;
};

/// One experiment. Field defaults are the documented config defaults.
struct ExperimentConfig {
  std::string experiment_id = "experiment";
  RunMode mode = RunMode::kFederated;
  ModelSpec model;
  PopulationParams population;  // feature_dim / num_classes follow `model`
  SamplingPolicy sampling;
  std::size_t shard_size = 0;  // 0: mean client size
  std::size_t rounds = 100;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 8;
  double client_lr = 0.008;
  ServerConfig server;
  FvnConfig fvn;
  AggregationWeighting weighting = AggregationWeighting::kEffective;
  CostConfig cost;
  std::size_t eval_every = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  /// Throws std::invalid_argument naming the offending field(s).
  void validate() const;

  /// Resolved P, nu and alpha for this experiment.
  CostConstants cost_constants() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses the flat "key = value" format ('#' starts a comment). Unknown or
/// repeated keys are errors; missing keys take their defaults.
ExperimentConfig parse_config(std::string_view text);

/// Writes every key in canonical order; parse_config of the result yields an
/// equal config.
std::string serialize_config(const ExperimentConfig& config);

ExperimentConfig load_config(const std::string& path);

}  // namespace fedsim
