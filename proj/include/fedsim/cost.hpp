// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace fedsim {

/// Per-client cost constants of the CFMQ metric, all in bytes except alpha.
struct CostConstants {
  double payload_bytes = 0.0;   // P: round-trip communication payload
  double peak_mem_bytes = 0.0;  // nu: peak memory of one local step
  double alpha = 1.0;           // weight of the computation term

  void validate() const;
  friend bool operator==(const CostConstants&, const CostConstants&) = default;
};

/// P = 2 * model size, nu = 1.1 * model size, alpha = 1.
CostConstants default_constants(double model_bytes);

/// Predicted mean local steps per client, e * N / (b * K).
double mu_formula(std::size_t local_epochs, std::size_t round_examples, std::size_t batch_size,
                  std::size_t clients);

/// R * K * (P + alpha * mu * nu), in bytes.
double cfmq(std::size_t rounds, std::size_t clients, const CostConstants& constants, double mu);

inline constexpr double kBytesPerTerabyte = 1e12;

/// Running CFMQ total. Each round adds K * (P + alpha * mu_r * nu) where mu_r
/// is the measured mean local step count of that round.
struct CostLedger {
  std::size_t rounds = 0;
  std::size_t clients = 0;  // K of the most recent round
  double mu_sum = 0.0;
  double cfmq_bytes = 0.0;

  double cfmq_terabytes() const noexcept { return cfmq_bytes / kBytesPerTerabyte; }
  double mean_mu() const noexcept { return rounds == 0 ? 0.0 : mu_sum / static_cast<double>(rounds); }
};

CostLedger ledger_accrue(CostLedger ledger, std::size_t clients, double mu_round,
                         const CostConstants& constants);

}  // namespace fedsim
