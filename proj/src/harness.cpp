// SPDX-License-Identifier: Apache-2.0
#include "fedsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fedsim/fedavg.hpp"

namespace fedsim {
namespace {

PopulationParams population_params(const ExperimentConfig& config) {
  PopulationParams p = config.population;
  p.feature_dim = config.model.input_dim;
  p.num_classes = config.model.num_classes;
  return p;
}

ServerOptimizer make_optimizer(const ServerConfig& server) {
  if (server.optimizer == OptimizerKind::kSgd) return ServerOptimizer::sgd(server.schedule);
  return ServerOptimizer::adam(server.schedule, server.beta1, server.beta2, server.epsilon);
}

struct Evaluator {
  const ModelSpec& spec;
  std::vector<Example> train;
  std::vector<Example> held_out;

  MetricsRow row(std::size_t round, const ParamVector& w) const {
    MetricsRow r;
    r.round = round;
    r.train_loss = loss(spec, w, train);
    r.eval_loss = loss(spec, w, held_out);
    r.eval_accuracy = spec.is_classifier() ? accuracy(spec, w, held_out)
                                           : std::numeric_limits<double>::quiet_NaN();
    return r;
  }
};

bool is_eval_point(std::size_t completed, std::size_t total, std::size_t every) {
  return completed % every == 0 || completed == total;
}

std::vector<MetricsRow> run_federated(const ExperimentConfig& config, Population pop, ParamVector init) {
  FederatedOptions options;
  options.policy = config.sampling;
  options.shard_size = config.shard_size != 0 ? config.shard_size
                                              : std::max<std::size_t>(1, pop.total_n() / pop.num_clients());
  options.local_epochs = config.local_epochs;
  options.batch_size = config.batch_size;
  options.client_lr = config.client_lr;
  options.fvn = config.fvn;
  options.weighting = config.weighting;
  options.cost = config.cost_constants();
  options.seed = config.seed;
  options.threads = config.threads;

  const Evaluator eval{config.model, pop.pooled(), pop.held_out};
  FederatedEngine engine(config.model, std::move(pop), options, make_optimizer(config.server), std::move(init));

  std::vector<MetricsRow> rows;
  MetricsRow first = eval.row(0, engine.weights());
  first.fvn_std = fvn_std_at(config.fvn, 0);
  first.lr_server = lr_at(config.server.schedule, 0);
  rows.push_back(first);

  for (std::size_t r = 0; r < config.rounds; ++r) {
    const RoundReport report = engine.run_round(r);
    if (!is_eval_point(r + 1, config.rounds, config.eval_every)) continue;
    MetricsRow row = eval.row(r + 1, engine.weights());
    row.cfmq_terabytes = report.cfmq_cumulative / kBytesPerTerabyte;
    row.fvn_std = report.fvn_std;
    row.lr_server = report.lr_server;
    row.clients_selected = report.selected.size();
    rows.push_back(row);
  }
  return rows;
}

std::vector<MetricsRow> run_centralized(const ExperimentConfig& config, const Population& pop, ParamVector init) {
  const Evaluator eval{config.model, pop.pooled(), pop.held_out};
  std::vector<MetricsRow> rows;
  MetricsRow first = eval.row(0, init);
  first.fvn_std = fvn_std_at(config.fvn, 0);
  first.lr_server = lr_at(config.server.schedule, 0);
  rows.push_back(first);
  if (config.rounds == 0) return rows;

  CostConstants compute_only = config.cost_constants();
  compute_only.payload_bytes = 0.0;
  CostLedger ledger;

  CentralizedOptions options;
  options.batch_size = config.batch_size;
  options.steps = config.rounds;
  options.noise = config.fvn;
  options.seed = config.seed;
  train_centralized(config.model, eval.train, std::move(init), make_optimizer(config.server), options,
                    [&](std::size_t done, const ParamVector& w) {
                      ledger = ledger_accrue(ledger, 1, 1.0, compute_only);
                      if (!is_eval_point(done, config.rounds, config.eval_every)) return;
                      MetricsRow row = eval.row(done, w);
                      row.cfmq_terabytes = ledger.cfmq_terabytes();
                      row.fvn_std = fvn_std_at(config.fvn, done - 1);
                      row.lr_server = lr_at(config.server.schedule, done - 1);
                      rows.push_back(row);
                    });
  return rows;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_csv_real(const std::string& cell, std::size_t line_no) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size()) {
    throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
  }
  return v;
}

std::size_t parse_csv_count(const std::string& cell, std::size_t line_no) {
  if (cell.empty() || cell.find_first_not_of("0123456789") != std::string::npos) {
    throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": bad integer '" + cell + "'");
  }
  return static_cast<std::size_t>(std::stoull(cell));
}

}  // namespace

std::vector<MetricsRow> run_experiment(const ExperimentConfig& config) {
  config.validate();
  Population pop = generate_population(population_params(config), config.seed);
  if (pop.held_out.empty()) {
    throw std::invalid_argument("held-out split is empty; raise population.eval_fraction");
  }
  ParamVector init = init_weights(config.model, config.seed);
  if (config.mode == RunMode::kCentralized) return run_centralized(config, pop, std::move(init));
  return run_federated(config, std::move(pop), std::move(init));
}

std::string format_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.round);
    for (double v : {r.train_loss, r.eval_loss, r.eval_accuracy, r.cfmq_terabytes, r.fvn_std, r.lr_server}) {
      out += ',';
      out += format_real(v);
    }
    out += ',';
    out += std::to_string(r.clients_selected);
    out += '\n';
  }
  return out;
}

void emit_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  if (rows.empty()) throw std::invalid_argument("emit_csv: no rows");
  const std::string text = format_csv(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error("metrics CSV: unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) {
      throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": expected 8 columns");
    }
    MetricsRow r;
    r.round = parse_csv_count(cells[0], line_no);
    r.train_loss = parse_csv_real(cells[1], line_no);
    r.eval_loss = parse_csv_real(cells[2], line_no);
    r.eval_accuracy = parse_csv_real(cells[3], line_no);
    r.cfmq_terabytes = parse_csv_real(cells[4], line_no);
    r.fvn_std = parse_csv_real(cells[5], line_no);
    r.lr_server = parse_csv_real(cells[6], line_no);
    r.clients_selected = parse_csv_count(cells[7], line_no);
    if (!rows.empty() && r.round <= rows.back().round) {
      throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": round column not increasing");
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error("metrics CSV: no data rows");
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_metrics_csv(buf.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::vector<ComparisonEntry> compare_experiments(const std::vector<std::filesystem::path>& csv_paths) {
  if (csv_paths.empty()) throw std::invalid_argument("compare: no CSV files given");
  std::vector<ComparisonEntry> entries;
  for (const auto& path : csv_paths) {
    const auto rows = read_metrics_csv(path);
    const MetricsRow& last = rows.back();
    entries.push_back({path.stem().string(), last.round, last.eval_loss, last.eval_accuracy, last.cfmq_terabytes});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const ComparisonEntry& a, const ComparisonEntry& b) {
    if (a.cfmq_terabytes != b.cfmq_terabytes) return a.cfmq_terabytes < b.cfmq_terabytes;
    if (a.final_eval_loss != b.final_eval_loss) return a.final_eval_loss < b.final_eval_loss;
    return a.experiment < b.experiment;
  });
  return entries;
}

std::string format_comparison_text(const std::vector<ComparisonEntry>& entries) {
  std::size_t name_width = std::string_view("experiment").size();
  for (const auto& e : entries) name_width = std::max(name_width, e.experiment.size());
  const int w = static_cast<int>(name_width);

  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %14s %14s %18s\n", w, "experiment", "rounds", "eval_loss",
                "eval_accuracy", "cfmq_terabytes");
  out += buf;
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%-*s %8zu %14.6g %14.6g %18.6g\n", w, e.experiment.c_str(), e.rounds,
                  e.final_eval_loss, e.final_eval_accuracy, e.cfmq_terabytes);
    out += buf;
  }
  return out;
}

std::string format_comparison_csv(const std::vector<ComparisonEntry>& entries) {
  std::string out = "experiment,rounds,final_eval_loss,final_eval_accuracy,cfmq_terabytes\n";
  for (const auto& e : entries) {
    out += e.experiment + ',' + std::to_string(e.rounds) + ',' + format_real(e.final_eval_loss) + ',' +
           format_real(e.final_eval_accuracy) + ',' + format_real(e.cfmq_terabytes) + '\n';
  }
  return out;
}

}  // namespace fedsim
