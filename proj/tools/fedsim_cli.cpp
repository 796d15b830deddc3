// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/harness.hpp"

namespace {

fedsim::ExperimentConfig load_with_override(const std::string& path, const std::optional<std::uint64_t>& seed) {
  fedsim::ExperimentConfig config = fedsim::load_config(path);
  if (seed) config.seed = *seed;
  return config;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated averaging simulator with CFMQ cost accounting"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Override the config seed");

  std::string config_path;
  std::string out_path;

  auto* run = app.add_subcommand("run", "Run one experiment and write its metrics CSV");
  run->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "Metrics CSV output path")->required();

  std::vector<std::string> csv_paths;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Summarize final quality against CFMQ");
  compare->add_option("csv", csv_paths, "Metrics CSV files")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", compare_out, "Also write the summary as CSV");

  auto* gen = app.add_subcommand("gen-data", "Dump the synthetic training population");
  gen->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Population output path")->required();

  std::vector<std::string> batch_configs;
  std::string out_dir;
  auto* batch = app.add_subcommand("batch", "Run several configs sequentially, one CSV per experiment_id");
  batch->add_option("configs", batch_configs, "Experiment config files")->required()->check(CLI::ExistingFile);
  batch->add_option("--out-dir", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto config = load_with_override(config_path, seed);
      fedsim::emit_csv(fedsim::run_experiment(config), out_path);
    } else if (*compare) {
      std::vector<std::filesystem::path> paths(csv_paths.begin(), csv_paths.end());
      const auto entries = fedsim::compare_experiments(paths);
      std::cout << fedsim::format_comparison_text(entries);
      if (!compare_out.empty()) write_text(compare_out, fedsim::format_comparison_csv(entries));
    } else if (*gen) {
      const auto config = load_with_override(config_path, seed);
      fedsim::PopulationParams params = config.population;
      params.feature_dim = config.model.input_dim;
      params.num_classes = config.model.num_classes;
      std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
      fedsim::write_population(fedsim::generate_population(params, config.seed), out);
      if (!out) throw std::runtime_error("failed writing '" + out_path + "'");
    } else if (*batch) {
      std::filesystem::create_directories(out_dir);
      for (const auto& path : batch_configs) {
        const auto config = load_with_override(path, seed);
        const auto target = std::filesystem::path(out_dir) / (config.experiment_id + ".csv");
        fedsim::emit_csv(fedsim::run_experiment(config), target);
        std::cout << config.experiment_id << " -> " << target.string() << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
