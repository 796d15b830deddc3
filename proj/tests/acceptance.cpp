// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/cost.hpp"
#include "fedsim/data.hpp"
#include "fedsim/fedavg.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/model.hpp"
#include "fedsim/optim.hpp"
#include "fedsim/rng.hpp"

namespace {

using namespace fedsim;

struct Outcome {
  bool pass = false;
  std::string detail;
};

const std::filesystem::path kConfigDir = std::filesystem::path(FEDSIM_SOURCE_DIR) / "configs";

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ModelSpec random_spec(rng::Stream& s) {
  ModelSpec spec;
  switch (s.below(3)) {
    case 0:
      spec.kind = ModelKind::kLinear;
      spec.num_classes = 1;
      break;
    case 1:
      spec.kind = ModelKind::kLogistic;
      spec.num_classes = 2 + s.below(3);
      break;
    default:
      spec.kind = ModelKind::kMlp;
      spec.hidden_dim = 1 + s.below(5);
      spec.num_classes = 2 + s.below(3);
  }
  spec.input_dim = 1 + s.below(5);
  return spec;
}

Example random_example(const ModelSpec& spec, rng::Stream& s) {
  Example ex;
  for (std::size_t i = 0; i < spec.input_dim; ++i) ex.features.push_back(s.normal());
  ex.label = spec.is_classifier() ? static_cast<double>(s.below(spec.num_classes)) : s.normal();
  return ex;
}

ParamVector random_weights(const ModelSpec& spec, rng::Stream& s, double scale) {
  ParamVector w(param_count(spec));
  for (std::size_t i = 0; i < w.dim(); ++i) w[i] = scale * s.normal();
  return w;
}

// 1. One FedAvg round with one example per client, b=1, e=1, client lr 1 and
// server SGD is one SGD step on the mean gradient of the sampled examples.
Outcome iid_reduction() {
  rng::Stream s(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ModelSpec spec = random_spec(s);
    const std::size_t m = 1 + s.below(12);
    const std::size_t k = 1 + s.below(m);
    Population pop;
    pop.feature_dim = spec.input_dim;
    for (std::size_t c = 0; c < m; ++c) {
      pop.clients.push_back({static_cast<int>(c), {random_example(spec, s)}});
    }
    const ParamVector w0 = random_weights(spec, s, 0.5);
    const double eta = s.uniform(0.01, 2.0);

    FederatedOptions options;
    options.policy.mode = SamplingMode::kNonIid;
    options.policy.clients_per_round = k;
    options.local_epochs = 1;
    options.batch_size = 1;
    options.client_lr = 1.0;
    options.cost = default_constants(1000);
    options.seed = s.next_u64();
    LrSchedule schedule;
    schedule.base_lr = eta;
    FederatedEngine engine(spec, pop, options, ServerOptimizer::sgd(schedule), w0);
    const std::size_t round = s.below(1000);
    const RoundReport report = engine.run_round(round);

    std::vector<Example> batch;
    for (int id : report.selected) batch.push_back(pop.clients[static_cast<std::size_t>(id)].examples[0]);
    const ParamVector expected = w0 - eta * gradient(spec, w0, batch);
    for (std::size_t i = 0; i < expected.dim(); ++i) {
      worst = std::max(worst, std::abs(engine.weights()[i] - expected[i]));
    }
  }
  return {worst <= 1e-12, fmt("100 instances, max |diff| %.3g (tol 1e-12)", worst)};
}

// 2. Analytic gradient against central differences.
Outcome gradient_check() {
  rng::Stream s(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ModelSpec spec = random_spec(s);
    const ParamVector w = random_weights(spec, s, 0.7);
    std::vector<Example> batch;
    const std::size_t n = 1 + s.below(8);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(random_example(spec, s));
    const ParamVector g = gradient(spec, w, batch);
    const ParamVector fd = finite_diff_gradient(spec, w, batch);
    const double denom = std::max({g.norm(), fd.norm(), 1e-12});
    worst = std::max(worst, (g - fd).norm() / denom);
  }
  return {worst < 1e-4, fmt("100 triples, max relative error %.3g (tol 1e-4)", worst)};
}

// 3. Ledger over uniform rounds against the closed form and an integer oracle.
Outcome cfmq_closed_form() {
  const double point = cfmq(100, 128, {960e6, 660e6, 1.0}, 1.0);
  bool ok = point == 2.0736e13;
  rng::Stream s(303);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint64_t rounds = s.below(501);
    const std::uint64_t k = 1 + s.below(256);
    const std::uint64_t p = s.below(1'000'000'001);
    const std::uint64_t nu = s.below(1'000'000'001);
    const std::uint64_t alpha = s.below(4);
    const std::uint64_t mu = s.below(11);
    const CostConstants c{static_cast<double>(p), static_cast<double>(nu), static_cast<double>(alpha)};
    CostLedger ledger;
    for (std::uint64_t r = 0; r < rounds; ++r) ledger = ledger_accrue(ledger, k, static_cast<double>(mu), c);
    const std::uint64_t exact = rounds * k * (p + alpha * mu * nu);
    const double closed = cfmq(rounds, k, c, static_cast<double>(mu));
    if (ledger.cfmq_bytes != closed || closed != static_cast<double>(exact) || ledger.rounds != rounds) {
      ++mismatches;
    }
  }
  ok = ok && mismatches == 0;
  return {ok, fmt("point check %.17g bytes, %d/1000 random configs mismatched", point, mismatches)};
}

// Criteria 4-7 share one sweep over the non-IID study configs.
struct StudyRuns {
  std::vector<std::vector<MetricsRow>> iid, non, limited, fvn, fvn_limited;
};

std::vector<MetricsRow> run_config(const std::string& name, std::uint64_t seed) {
  ExperimentConfig config = load_config((kConfigDir / "noniid_study" / (name + ".conf")).string());
  config.seed = seed;
  return run_experiment(config);
}

const StudyRuns& study() {
  static const StudyRuns runs = [] {
    StudyRuns r;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      r.iid.push_back(run_config("iid", seed));
      r.non.push_back(run_config("non_iid", seed));
      r.limited.push_back(run_config("non_iid_limit4", seed));
      r.fvn.push_back(run_config("non_iid_fvn", seed));
      r.fvn_limited.push_back(run_config("non_iid_fvn_limit4", seed));
    }
    return r;
  }();
  return runs;
}

std::vector<double> final_losses(const std::vector<std::vector<MetricsRow>>& runs) {
  std::vector<double> out;
  for (const auto& rows : runs) out.push_back(rows.back().eval_loss);
  return out;
}

Outcome noniid_degradation() {
  const auto iid = final_losses(study().iid);
  const auto non = final_losses(study().non);
  int wins = 0;
  for (std::size_t i = 0; i < iid.size(); ++i) wins += non[i] > iid[i];
  return {wins >= 8, fmt("non-IID worse than IID shards in %d/10 seeds (need >= 8); median %.4f vs %.4f", wins,
                         median(non), median(iid))};
}

Outcome data_limit_recovery() {
  const auto iid = final_losses(study().iid);
  const auto non = final_losses(study().non);
  const auto lim = final_losses(study().limited);
  std::vector<double> gap, gap_lim;
  for (std::size_t i = 0; i < iid.size(); ++i) {
    gap.push_back(non[i] - iid[i]);
    gap_lim.push_back(lim[i] - iid[i]);
  }
  const double g = median(gap);
  const double gl = median(gap_lim);
  const double reduction = g > 0.0 ? 1.0 - gl / g : 0.0;
  return {g > 0.0 && reduction >= 0.30,
          fmt("median gap %.4f -> %.4f with data_limit=4, reduction %.1f%% (need >= 30%%)", g, gl, 100 * reduction)};
}

Outcome fvn_recovery() {
  const auto off_losses = final_losses(study().non);
  const auto on_losses = final_losses(study().fvn);
  const double off = median(off_losses);
  const double on = median(on_losses);
  int better = 0;
  for (std::size_t i = 0; i < on_losses.size(); ++i) better += on_losses[i] < off_losses[i];

  bool identical = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ExperimentConfig base = load_config((kConfigDir / "noniid_study" / "non_iid.conf").string());
    base.seed = seed;
    base.rounds = 40;
    ExperimentConfig zero = base;
    zero.fvn.enabled = true;
    zero.fvn.schedule = NoiseScheduleKind::kLinearRamp;
    zero.fvn.std_dev = 0.0;
    zero.fvn.ramp_rounds = 20;
    identical = identical && format_csv(run_experiment(base)) == format_csv(run_experiment(zero));
  }
  return {on < off && identical,
          fmt("median eval loss %.4f with FVN ramp vs %.4f without (lower in %d/10 seeds); std=0 schedule %s disabled",
              on, off, better, identical ? "bit-identical to" : "DIFFERS from")};
}

// CFMQ spent until a run first reaches `target` eval loss (within 2%).
double cost_to_reach(const std::vector<MetricsRow>& rows, double target) {
  for (const auto& row : rows) {
    if (row.eval_loss <= target * 1.02) return row.cfmq_terabytes;
  }
  return rows.back().cfmq_terabytes;
}

Outcome cost_ordering() {
  const auto& unl = study().fvn;
  const auto& lim = study().fvn_limited;
  std::vector<double> cost_unl, cost_lim;
  int cheaper = 0;
  for (std::size_t i = 0; i < unl.size(); ++i) {
    const double target = std::max(unl[i].back().eval_loss, lim[i].back().eval_loss);
    cost_unl.push_back(cost_to_reach(unl[i], target));
    cost_lim.push_back(cost_to_reach(lim[i], target));
    cheaper += cost_lim.back() < cost_unl.back();
  }
  const double mu = median(cost_unl);
  const double ml = median(cost_lim);
  return {ml < mu, fmt("median CFMQ at matched quality %.4g TB (data_limit=4) vs %.4g TB (unlimited); "
                       "cheaper in %d/10 seeds; final loss %.4f vs %.4f",
                       ml, mu, cheaper, median(final_losses(lim)), median(final_losses(unl)))};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "fedsim_acceptance";
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> configs;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(kConfigDir)) {
    if (entry.path().extension() == ".conf") configs.push_back(entry.path());
  }
  std::sort(configs.begin(), configs.end());
  int failures = 0;
  for (const auto& path : configs) {
    ExperimentConfig config = load_config(path.string());
    config.threads = 1;
    emit_csv(run_experiment(config), dir / "a.csv");
    emit_csv(run_experiment(config), dir / "b.csv");
    config.threads = 4;
    emit_csv(run_experiment(config), dir / "c.csv");
    const std::string a = read_file(dir / "a.csv");
    failures += a != read_file(dir / "b.csv") || a != read_file(dir / "c.csv");
  }
  std::filesystem::remove_all(dir);
  return {failures == 0 && !configs.empty(),
          fmt("%zu configs: repeat and 4-thread CSVs byte-identical to serial in %zu, differing in %d",
              configs.size(), configs.size() - static_cast<std::size_t>(failures), failures)};
}

Outcome aggregation_algebra() {
  rng::Stream s(909);
  double worst_sum = 0.0;
  int hull_violations = 0;
  int permutation_mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + s.below(16);
    const std::size_t dim = 1 + s.below(20);
    std::vector<int> ids(k);
    for (std::size_t i = 0; i < k; ++i) ids[i] = static_cast<int>(i * 3 + s.below(3));
    s.shuffle(ids);
    std::vector<ClientUpdateResult> results;
    for (std::size_t i = 0; i < k; ++i) {
      ClientUpdateResult r;
      r.client_id = ids[i];
      r.n_k_effective = 1 + s.below(500);
      r.n_k_full = r.n_k_effective + s.below(100);
      ParamVector d(dim);
      for (std::size_t j = 0; j < dim; ++j) d[j] = s.normal() * std::pow(10.0, s.uniform(-3.0, 3.0));
      r.delta = d;
      results.push_back(r);
    }
    double sum = 0.0;
    for (double w : aggregation_weights(results)) sum += w;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));

    const ParamVector avg = aggregate(results);
    for (std::size_t j = 0; j < dim; ++j) {
      double lo = results[0].delta[j], hi = lo, scale = 0.0;
      for (const auto& r : results) {
        lo = std::min(lo, r.delta[j]);
        hi = std::max(hi, r.delta[j]);
        scale = std::max(scale, std::abs(r.delta[j]));
      }
      const double slack = 1e-12 * scale;
      if (avg[j] < lo - slack || avg[j] > hi + slack) ++hull_violations;
    }
    auto shuffled = results;
    s.shuffle(shuffled);
    if (!(aggregate(shuffled) == avg)) ++permutation_mismatches;
  }
  return {worst_sum <= 1e-12 && hull_violations == 0 && permutation_mismatches == 0,
          fmt("1000 cases: max |sum w - 1| %.3g, hull violations %d, permutation mismatches %d", worst_sum,
              hull_violations, permutation_mismatches)};
}

// Adam written out from the closed forms m_t = (1-b1) sum b1^(t-i) g_i and
// v_t = (1-b2) sum b2^(t-i) g_i^2, in long double.
Outcome adam_oracle() {
  constexpr int kSteps = 20;
  constexpr std::size_t kDim = 3;
  const long double lr = 0.01L, b1 = 0.9L, b2 = 0.999L, eps = 1e-8L;
  std::vector<std::vector<double>> grads(kSteps, std::vector<double>(kDim));
  for (int t = 0; t < kSteps; ++t) {
    for (std::size_t j = 0; j < kDim; ++j) grads[t][j] = std::sin(1.3 * (t + 1) + 0.7 * static_cast<double>(j)) * (j + 1.0);
  }
  std::vector<long double> oracle = {0.5L, -1.0L, 2.0L};

  AdamState state;
  state.lr = 0.01;
  ParamVector w{0.5, -1.0, 2.0};
  double worst = 0.0;
  for (int t = 1; t <= kSteps; ++t) {
    for (std::size_t j = 0; j < kDim; ++j) {
      long double m = 0.0L, v = 0.0L;
      for (int i = 1; i <= t; ++i) {
        const long double g = grads[i - 1][j];
        m += (1 - b1) * std::pow(b1, static_cast<long double>(t - i)) * g;
        v += (1 - b2) * std::pow(b2, static_cast<long double>(t - i)) * g * g;
      }
      const long double m_hat = m / (1 - std::pow(b1, static_cast<long double>(t)));
      const long double v_hat = v / (1 - std::pow(b2, static_cast<long double>(t)));
      oracle[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    auto [next, next_state] = adam_step(state, w, ParamVector(grads[t - 1]));
    w = next;
    state = next_state;
    for (std::size_t j = 0; j < kDim; ++j) {
      worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(w[j]) - oracle[j])));
    }
  }
  return {worst <= 1e-12, fmt("20 steps, max |diff| %.3g (tol 1e-12)", worst)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "IID reduction", iid_reduction},
      {2, "gradient correctness", gradient_check},
      {3, "CFMQ closed form", cfmq_closed_form},
      {4, "non-IID degradation", noniid_degradation},
      {5, "data-limit recovery", data_limit_recovery},
      {6, "FVN recovery", fvn_recovery},
      {7, "cost ordering", cost_ordering},
      {8, "determinism", determinism},
      {9, "aggregation algebra", aggregation_algebra},
      {10, "Adam oracle", adam_oracle},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %-22s %s  %s [%.2fs]\n", c.id, c.name, outcome.pass ? "PASS" : "FAIL",
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !outcome.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
