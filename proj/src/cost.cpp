// SPDX-License-Identifier: Apache-2.0
#include "fedsim/cost.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

void CostConstants::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
    }
  };
  check(payload_bytes, "cost.payload_bytes");
  check(peak_mem_bytes, "cost.peak_mem_bytes");
  check(alpha, "cost.alpha");
}

CostConstants default_constants(double model_bytes) {
  if (!(model_bytes >= 0.0)) throw std::invalid_argument("model_bytes must be >= 0");
  return CostConstants{2.0 * model_bytes, 1.1 * model_bytes, 1.0};
}

double mu_formula(std::size_t local_epochs, std::size_t round_examples, std::size_t batch_size,
                  std::size_t clients) {
  if (batch_size == 0) throw std::invalid_argument("mu_formula: batch size must be >= 1");
  if (clients == 0) throw std::invalid_argument("mu_formula: client count must be >= 1");
  return static_cast<double>(local_epochs) * static_cast<double>(round_examples) /
         (static_cast<double>(batch_size) * static_cast<double>(clients));
}

double cfmq(std::size_t rounds, std::size_t clients, const CostConstants& constants, double mu) {
  return static_cast<double>(rounds) * static_cast<double>(clients) *
         (constants.payload_bytes + constants.alpha * mu * constants.peak_mem_bytes);
}

CostLedger ledger_accrue(CostLedger ledger, std::size_t clients, double mu_round,
                         const CostConstants& constants) {
  ledger.rounds += 1;
  ledger.clients = clients;
  ledger.mu_sum += mu_round;
  ledger.cfmq_bytes += static_cast<double>(clients) *
                       (constants.payload_bytes + constants.alpha * mu_round * constants.peak_mem_bytes);
  return ledger;
}

}  // namespace fedsim
