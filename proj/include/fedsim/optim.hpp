// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>

#include "fedsim/param_vector.hpp"

namespace fedsim {

struct SgdState {
  double lr = 0.008;
};

/// w - lr * g
ParamVector sgd_step(const SgdState& state, const ParamVector& w, const ParamVector& g);

/// Adam with bias correction. `m` and `v` are sized lazily on the first step
/// when left empty.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ParamVector m;
  ParamVector v;
  std::uint64_t t = 0;
};

std::pair<ParamVector, AdamState> adam_step(const AdamState& state, const ParamVector& w,
                                            const ParamVector& g);

enum class ScheduleKind { kConstant, kLinearRampup, kRampupThenExpDecay };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view text);

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double base_lr = 0.001;
  std::size_t rampup_rounds = 0;
  double decay_rate = 1.0;
  std::size_t decay_every = 1;

  void validate() const;
  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

/// Learning rate for 0-based `round`.
///   constant:              base_lr
///   linear_rampup:         base_lr * min(1, (round + 1) / rampup_rounds)
///   rampup_then_expdecay:  ramp value * decay_rate^floor(max(0, round - rampup_rounds) / decay_every)
/// A zero-length ramp-up means no ramp.
double lr_at(const LrSchedule& schedule, std::size_t round);

enum class NoiseScheduleKind { kConstant, kLinearRamp };

std::string_view to_string(NoiseScheduleKind kind);
NoiseScheduleKind parse_noise_schedule_kind(std::string_view text);

/// Federated variational noise: every client perturbs its weights with its own
/// Gaussian draw at each local step.
///
/// With `transient` set the noisy weights are only used to evaluate the
/// gradient and the SGD step is applied to the clean weights. Otherwise the
/// noise stays in the weights the step is applied to.
struct FvnConfig {
  bool enabled = false;
  NoiseScheduleKind schedule = NoiseScheduleKind::kConstant;
  double std_dev = 0.0;  // constant value, or the ramp target
  std::size_t ramp_rounds = 0;
  bool transient = true;

  void validate() const;
  friend bool operator==(const FvnConfig&, const FvnConfig&) = default;
};

/// Noise standard deviation for `round`; 0 when disabled.
/// linear_ramp: std_dev * min(1, round / ramp_rounds).
double fvn_std_at(const FvnConfig& config, std::size_t round);

struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t round = 0;
  std::uint64_t client_id = 0;
  std::uint64_t local_step = 0;
};

/// w + N(0, std^2) per coordinate from the stream identified by `key`.
/// std == 0 returns w unchanged without touching any random stream.
ParamVector fvn_perturb(const ParamVector& w, double std, const NoiseKey& key);

}  // namespace fedsim
