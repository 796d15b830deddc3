// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/config.hpp"

namespace fedsim {

/// One evaluation point. `round` counts completed rounds (centralized runs:
/// completed steps). eval_accuracy is NaN for regression models.
struct MetricsRow {
  std::size_t round = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
  double cfmq_terabytes = 0.0;
  double fvn_std = 0.0;
  double lr_server = 0.0;
  std::size_t clients_selected = 0;
};

inline constexpr std::string_view kMetricsHeader =
    "round,train_loss,eval_loss,eval_accuracy,cfmq_terabytes,fvn_std,lr_server,clients_selected";

/// Runs the experiment and returns one row at round 0, one every `eval_every`
/// rounds, and one after the final round. Centralized runs accrue only the
/// computation term, alpha * nu per step.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& config);

/// CSV text: header line, then one row per entry. Reals use 17 significant
/// digits, lines end in LF.
std::string format_csv(const std::vector<MetricsRow>& rows);
void emit_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

std::vector<MetricsRow> parse_metrics_csv(std::string_view text);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct ComparisonEntry {
  std::string experiment;  // CSV file stem
  std::size_t rounds = 0;
  double final_eval_loss = 0.0;
  double final_eval_accuracy = 0.0;
  double cfmq_terabytes = 0.0;
};

/// Final quality and cost per experiment, cheapest first (ties: lower eval
/// loss, then name).
std::vector<ComparisonEntry> compare_experiments(const std::vector<std::filesystem::path>& csv_paths);

std::string format_comparison_text(const std::vector<ComparisonEntry>& entries);
std::string format_comparison_csv(const std::vector<ComparisonEntry>& entries);

}  // namespace fedsim
