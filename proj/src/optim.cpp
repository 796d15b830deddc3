// SPDX-License-Identifier: Apache-2.0
#include "fedsim/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

ParamVector sgd_step(const SgdState& state, const ParamVector& w, const ParamVector& g) {
  require_same_dim(w, g, "sgd_step");
  ParamVector out = w;
  out.axpy(-state.lr, g);
  out.require_finite("sgd_step result");
  return out;
}

std::pair<ParamVector, AdamState> adam_step(const AdamState& state, const ParamVector& w,
                                            const ParamVector& g) {
  require_same_dim(w, g, "adam_step");
  AdamState next = state;
  if (next.m.empty()) next.m = ParamVector::zeros(w.dim());
  if (next.v.empty()) next.v = ParamVector::zeros(w.dim());
  require_same_dim(w, next.m, "adam_step first moment");
  require_same_dim(w, next.v, "adam_step second moment");

  next.t += 1;
  const double t = static_cast<double>(next.t);
  const double correct1 = 1.0 - std::pow(next.beta1, t);
  const double correct2 = 1.0 - std::pow(next.beta2, t);
  ParamVector out = w;
  for (std::size_t i = 0; i < w.dim(); ++i) {
    next.m[i] = next.beta1 * next.m[i] + (1.0 - next.beta1) * g[i];
    next.v[i] = next.beta2 * next.v[i] + (1.0 - next.beta2) * g[i] * g[i];
    const double m_hat = next.m[i] / correct1;
    const double v_hat = next.v[i] / correct2;
    out[i] = w[i] - next.lr * m_hat / (std::sqrt(v_hat) + next.epsilon);
  }
  out.require_finite("adam_step result");
  return {std::move(out), std::move(next)};
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kConstant:
      return "constant";
    case ScheduleKind::kLinearRampup:
      return "linear_rampup";
    case ScheduleKind::kRampupThenExpDecay:
      return "rampup_then_expdecay";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "constant") return ScheduleKind::kConstant;
  if (text == "linear_rampup") return ScheduleKind::kLinearRampup;
  if (text == "rampup_then_expdecay") return ScheduleKind::kRampupThenExpDecay;
  throw std::invalid_argument("unknown lr schedule '" + std::string(text) +
                              "' (expected constant, linear_rampup or rampup_then_expdecay)");
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw std::invalid_argument("lr schedule base_lr must be > 0");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw std::invalid_argument("lr schedule decay_rate must be in (0, 1]");
  if (decay_every == 0) throw std::invalid_argument("lr schedule decay_every must be >= 1");
}

double lr_at(const LrSchedule& schedule, std::size_t round) {
  if (schedule.kind == ScheduleKind::kConstant) return schedule.base_lr;

  double lr = schedule.base_lr;
  if (schedule.rampup_rounds > 0) {
    lr *= std::min(1.0, static_cast<double>(round + 1) / static_cast<double>(schedule.rampup_rounds));
  }
  if (schedule.kind == ScheduleKind::kRampupThenExpDecay) {
    const std::size_t past = round > schedule.rampup_rounds ? round - schedule.rampup_rounds : 0;
    lr *= std::pow(schedule.decay_rate, static_cast<double>(past / schedule.decay_every));
  }
  return lr;
}

std::string_view to_string(NoiseScheduleKind kind) {
  return kind == NoiseScheduleKind::kConstant ? "constant" : "linear_ramp";
}

NoiseScheduleKind parse_noise_schedule_kind(std::string_view text) {
  if (text == "constant") return NoiseScheduleKind::kConstant;
  if (text == "linear_ramp") return NoiseScheduleKind::kLinearRamp;
  throw std::invalid_argument("unknown fvn schedule '" + std::string(text) +
                              "' (expected constant or linear_ramp)");
}

void FvnConfig::validate() const {
  if (!(std_dev >= 0.0) || !std::isfinite(std_dev)) throw std::invalid_argument("fvn.std must be finite and >= 0");
}

double fvn_std_at(const FvnConfig& config, std::size_t round) {
  if (!config.enabled) return 0.0;
  if (config.schedule == NoiseScheduleKind::kConstant || config.ramp_rounds == 0) return config.std_dev;
  return config.std_dev *
         std::min(1.0, static_cast<double>(round) / static_cast<double>(config.ramp_rounds));
}

ParamVector fvn_perturb(const ParamVector& w, double std, const NoiseKey& key) {
  if (!(std >= 0.0)) throw std::invalid_argument("fvn_perturb: std must be >= 0");
  if (std == 0.0) return w;
  rng::Stream stream(key.seed, rng::Purpose::kNoise, key.round, key.client_id, key.local_step);
  ParamVector out = w;
  for (std::size_t i = 0; i < out.dim(); ++i) out[i] += std * stream.normal();
  return out;
}

}  // namespace fedsim
