// SPDX-License-Identifier: Apache-2.0
#include "fedsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fedsim {

std::string_view to_string(RunMode mode) {
  return mode == RunMode::kFederated ? "federated" : "centralized";
}

std::string_view to_string(SamplingMode mode) {
  return mode == SamplingMode::kIid ? "iid" : "non_iid";
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(key) + ": expected a real number, got '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(std::string(key) + ": expected a non-negative integer, got '" +
                                std::string(text) + "'");
  }
  return v;
}

std::size_t parse_size(std::string_view key, std::string_view text) {
  return static_cast<std::size_t>(parse_u64(key, text));
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw std::invalid_argument(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

template <typename Fn>
auto rethrow_with_key(std::string_view key, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(key) + ": " + e.what());
  }
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

LognormalCounts& lognormal(ExperimentConfig& c) {
  if (!std::holds_alternative<LognormalCounts>(c.population.counts)) c.population.counts = LognormalCounts{};
  return std::get<LognormalCounts>(c.population.counts);
}

FixedCounts& fixed(ExperimentConfig& c) {
  if (!std::holds_alternative<FixedCounts>(c.population.counts)) c.population.counts = FixedCounts{};
  return std::get<FixedCounts>(c.population.counts);
}

std::string optional_real(const std::optional<double>& v) { return v ? format_real(*v) : "none"; }

// Canonical key order. The population count keys depend on the distribution,
// so `population.counts` must precede its parameters.
const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  using SV = std::string_view;
  static const std::vector<Field> table = {
      {"experiment_id", [](C& c, SV v) { c.experiment_id = std::string(v); },
       [](const C& c) { return c.experiment_id; }},
      {"mode",
       [](C& c, SV v) {
         if (v == "federated") c.mode = RunMode::kFederated;
         else if (v == "centralized") c.mode = RunMode::kCentralized;
         else throw std::invalid_argument("mode: expected federated or centralized, got '" + std::string(v) + "'");
       },
       [](const C& c) { return std::string(to_string(c.mode)); }},
      {"seed", [](C& c, SV v) { c.seed = parse_u64("seed", v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"rounds", [](C& c, SV v) { c.rounds = parse_size("rounds", v); },
       [](const C& c) { return std::to_string(c.rounds); }},
      {"eval_every", [](C& c, SV v) { c.eval_every = parse_size("eval_every", v); },
       [](const C& c) { return std::to_string(c.eval_every); }},
      {"threads", [](C& c, SV v) { c.threads = parse_size("threads", v); },
       [](const C& c) { return std::to_string(c.threads); }},

      {"model.kind", [](C& c, SV v) { c.model.kind = rethrow_with_key("model.kind", [&] { return parse_model_kind(v); }); },
       [](const C& c) { return std::string(to_string(c.model.kind)); }},
      {"model.input_dim", [](C& c, SV v) { c.model.input_dim = parse_size("model.input_dim", v); },
       [](const C& c) { return std::to_string(c.model.input_dim); }},
      {"model.hidden_dim", [](C& c, SV v) { c.model.hidden_dim = parse_size("model.hidden_dim", v); },
       [](const C& c) { return std::to_string(c.model.hidden_dim); }},
      {"model.num_classes", [](C& c, SV v) { c.model.num_classes = parse_size("model.num_classes", v); },
       [](const C& c) { return std::to_string(c.model.num_classes); }},

      {"population.num_clients",
       [](C& c, SV v) { c.population.num_clients = parse_size("population.num_clients", v); },
       [](const C& c) { return std::to_string(c.population.num_clients); }},
      {"population.counts",
       [](C& c, SV v) {
         if (v == "lognormal") lognormal(c);
         else if (v == "fixed") fixed(c);
         else throw std::invalid_argument("population.counts: expected lognormal or fixed, got '" + std::string(v) + "'");
       },
       [](const C& c) {
         return std::string(std::holds_alternative<LognormalCounts>(c.population.counts) ? "lognormal" : "fixed");
       }},
      {"population.lognormal_mu", [](C& c, SV v) { lognormal(c).mu = parse_real("population.lognormal_mu", v); },
       [](const C& c) {
         const auto* ln = std::get_if<LognormalCounts>(&c.population.counts);
         return format_real(ln ? ln->mu : LognormalCounts{}.mu);
       }},
      {"population.lognormal_sigma",
       [](C& c, SV v) { lognormal(c).sigma = parse_real("population.lognormal_sigma", v); },
       [](const C& c) {
         const auto* ln = std::get_if<LognormalCounts>(&c.population.counts);
         return format_real(ln ? ln->sigma : LognormalCounts{}.sigma);
       }},
      {"population.fixed_n", [](C& c, SV v) { fixed(c).n = parse_size("population.fixed_n", v); },
       [](const C& c) {
         const auto* f = std::get_if<FixedCounts>(&c.population.counts);
         return std::to_string(f ? f->n : FixedCounts{}.n);
       }},
      {"population.cluster_spread",
       [](C& c, SV v) { c.population.cluster_spread = parse_real("population.cluster_spread", v); },
       [](const C& c) { return format_real(c.population.cluster_spread); }},
      {"population.center_scale",
       [](C& c, SV v) { c.population.center_scale = parse_real("population.center_scale", v); },
       [](const C& c) { return format_real(c.population.center_scale); }},
      {"population.label_sharpness",
       [](C& c, SV v) { c.population.label_sharpness = parse_real("population.label_sharpness", v); },
       [](const C& c) { return format_real(c.population.label_sharpness); }},
      {"population.teacher_hidden",
       [](C& c, SV v) { c.population.teacher_hidden = parse_size("population.teacher_hidden", v); },
       [](const C& c) { return std::to_string(c.population.teacher_hidden); }},
      {"population.eval_fraction",
       [](C& c, SV v) { c.population.eval_fraction = parse_real("population.eval_fraction", v); },
       [](const C& c) { return format_real(c.population.eval_fraction); }},

      {"sampling.mode",
       [](C& c, SV v) {
         if (v == "iid") c.sampling.mode = SamplingMode::kIid;
         else if (v == "non_iid") c.sampling.mode = SamplingMode::kNonIid;
         else throw std::invalid_argument("sampling.mode: expected iid or non_iid, got '" + std::string(v) + "'");
       },
       [](const C& c) { return std::string(to_string(c.sampling.mode)); }},
      {"sampling.clients_per_round",
       [](C& c, SV v) { c.sampling.clients_per_round = parse_size("sampling.clients_per_round", v); },
       [](const C& c) { return std::to_string(c.sampling.clients_per_round); }},
      {"sampling.data_limit",
       [](C& c, SV v) {
         if (v == "none") c.sampling.data_limit.reset();
         else c.sampling.data_limit = parse_size("sampling.data_limit", v);
       },
       [](const C& c) { return c.sampling.data_limit ? std::to_string(*c.sampling.data_limit) : std::string("none"); }},
      {"sampling.shard_size", [](C& c, SV v) { c.shard_size = parse_size("sampling.shard_size", v); },
       [](const C& c) { return std::to_string(c.shard_size); }},

      {"client.local_epochs", [](C& c, SV v) { c.local_epochs = parse_size("client.local_epochs", v); },
       [](const C& c) { return std::to_string(c.local_epochs); }},
      {"client.batch_size", [](C& c, SV v) { c.batch_size = parse_size("client.batch_size", v); },
       [](const C& c) { return std::to_string(c.batch_size); }},
      {"client.lr", [](C& c, SV v) { c.client_lr = parse_real("client.lr", v); },
       [](const C& c) { return format_real(c.client_lr); }},

      {"server.optimizer",
       [](C& c, SV v) { c.server.optimizer = rethrow_with_key("server.optimizer", [&] { return parse_optimizer_kind(v); }); },
       [](const C& c) { return std::string(to_string(c.server.optimizer)); }},
      {"server.lr", [](C& c, SV v) { c.server.schedule.base_lr = parse_real("server.lr", v); },
       [](const C& c) { return format_real(c.server.schedule.base_lr); }},
      {"server.schedule",
       [](C& c, SV v) { c.server.schedule.kind = rethrow_with_key("server.schedule", [&] { return parse_schedule_kind(v); }); },
       [](const C& c) { return std::string(to_string(c.server.schedule.kind)); }},
      {"server.rampup_rounds",
       [](C& c, SV v) { c.server.schedule.rampup_rounds = parse_size("server.rampup_rounds", v); },
       [](const C& c) { return std::to_string(c.server.schedule.rampup_rounds); }},
      {"server.decay_rate", [](C& c, SV v) { c.server.schedule.decay_rate = parse_real("server.decay_rate", v); },
       [](const C& c) { return format_real(c.server.schedule.decay_rate); }},
      {"server.decay_every", [](C& c, SV v) { c.server.schedule.decay_every = parse_size("server.decay_every", v); },
       [](const C& c) { return std::to_string(c.server.schedule.decay_every); }},
      {"server.beta1", [](C& c, SV v) { c.server.beta1 = parse_real("server.beta1", v); },
       [](const C& c) { return format_real(c.server.beta1); }},
      {"server.beta2", [](C& c, SV v) { c.server.beta2 = parse_real("server.beta2", v); },
       [](const C& c) { return format_real(c.server.beta2); }},
      {"server.epsilon", [](C& c, SV v) { c.server.epsilon = parse_real("server.epsilon", v); },
       [](const C& c) { return format_real(c.server.epsilon); }},

      {"fvn.enabled", [](C& c, SV v) { c.fvn.enabled = parse_bool("fvn.enabled", v); },
       [](const C& c) { return std::string(c.fvn.enabled ? "true" : "false"); }},
      {"fvn.schedule",
       [](C& c, SV v) { c.fvn.schedule = rethrow_with_key("fvn.schedule", [&] { return parse_noise_schedule_kind(v); }); },
       [](const C& c) { return std::string(to_string(c.fvn.schedule)); }},
      {"fvn.std", [](C& c, SV v) { c.fvn.std_dev = parse_real("fvn.std", v); },
       [](const C& c) { return format_real(c.fvn.std_dev); }},
      {"fvn.ramp_rounds", [](C& c, SV v) { c.fvn.ramp_rounds = parse_size("fvn.ramp_rounds", v); },
       [](const C& c) { return std::to_string(c.fvn.ramp_rounds); }},
      {"fvn.transient", [](C& c, SV v) { c.fvn.transient = parse_bool("fvn.transient", v); },
       [](const C& c) { return std::string(c.fvn.transient ? "true" : "false"); }},

      {"aggregation.weighting",
       [](C& c, SV v) {
         c.weighting = rethrow_with_key("aggregation.weighting", [&] { return parse_aggregation_weighting(v); });
       },
       [](const C& c) { return std::string(to_string(c.weighting)); }},

      {"cost.model_bytes",
       [](C& c, SV v) {
         if (v == "none") c.cost.model_bytes.reset();
         else c.cost.model_bytes = parse_real("cost.model_bytes", v);
       },
       [](const C& c) { return optional_real(c.cost.model_bytes); }},
      {"cost.payload_bytes",
       [](C& c, SV v) {
         if (v == "none") c.cost.payload_bytes.reset();
         else c.cost.payload_bytes = parse_real("cost.payload_bytes", v);
       },
       [](const C& c) { return optional_real(c.cost.payload_bytes); }},
      {"cost.peak_mem_bytes",
       [](C& c, SV v) {
         if (v == "none") c.cost.peak_mem_bytes.reset();
         else c.cost.peak_mem_bytes = parse_real("cost.peak_mem_bytes", v);
       },
       [](const C& c) { return optional_real(c.cost.peak_mem_bytes); }},
      {"cost.alpha", [](C& c, SV v) { c.cost.alpha = parse_real("cost.alpha", v); },
       [](const C& c) { return format_real(c.cost.alpha); }},
  };
  return table;
}

bool filesystem_safe(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
           ch == '-' || ch == '.';
  });
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!filesystem_safe(experiment_id)) {
    throw std::invalid_argument("experiment_id '" + experiment_id +
                                "' must be non-empty and use only [A-Za-z0-9_.-]");
  }
  model.validate();
  if (population.feature_dim != model.input_dim || population.num_classes != model.num_classes) {
    throw std::invalid_argument("population feature_dim/num_classes must follow model.input_dim/model.num_classes");
  }
  population.validate();
  if (eval_every == 0) throw std::invalid_argument("eval_every must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("client.batch_size must be >= 1");
  server.schedule.validate();
  if (!(server.beta1 >= 0.0 && server.beta1 < 1.0)) throw std::invalid_argument("server.beta1 must be in [0, 1)");
  if (!(server.beta2 >= 0.0 && server.beta2 < 1.0)) throw std::invalid_argument("server.beta2 must be in [0, 1)");
  if (!(server.epsilon > 0.0)) throw std::invalid_argument("server.epsilon must be > 0");
  fvn.validate();
  if (cost.payload_bytes.has_value() != cost.peak_mem_bytes.has_value()) {
    throw std::invalid_argument("cost.payload_bytes and cost.peak_mem_bytes must be given together");
  }
  if (cost.payload_bytes && cost.model_bytes) {
    throw std::invalid_argument("cost.model_bytes conflicts with explicit cost.payload_bytes/cost.peak_mem_bytes");
  }
  if (cost.model_bytes && !(*cost.model_bytes >= 0.0)) throw std::invalid_argument("cost.model_bytes must be >= 0");
  cost_constants().validate();

  if (mode == RunMode::kFederated) {
    const std::size_t k = sampling.clients_per_round;
    if (k == 0) throw std::invalid_argument("sampling.clients_per_round must be >= 1");
    if (k > population.num_clients) {
      throw std::invalid_argument("sampling.clients_per_round K=" + std::to_string(k) +
                                  " exceeds population.num_clients M=" + std::to_string(population.num_clients));
    }
    if (sampling.data_limit && *sampling.data_limit == 0) {
      throw std::invalid_argument("sampling.data_limit must be >= 1 (or none)");
    }
    if (local_epochs == 0) throw std::invalid_argument("client.local_epochs must be >= 1");
    if (!(client_lr >= 0.0)) throw std::invalid_argument("client.lr must be >= 0");
  }
}

CostConstants ExperimentConfig::cost_constants() const {
  if (cost.payload_bytes) return CostConstants{*cost.payload_bytes, *cost.peak_mem_bytes, cost.alpha};
  const double model_size = cost.model_bytes ? *cost.model_bytes : 8.0 * static_cast<double>(param_count(model));
  CostConstants out = default_constants(model_size);
  out.alpha = cost.alpha;
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;

    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    it->set(config, value);
  }
  config.population.feature_dim = config.model.input_dim;
  config.population.num_classes = config.model.num_classes;
  config.validate();
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  for (const Field& f : fields()) {
    if (const bool is_fixed = std::holds_alternative<FixedCounts>(config.population.counts);
        (is_fixed && f.key.rfind("population.lognormal_", 0) == 0) || (!is_fixed && f.key == "population.fixed_n")) {
      continue;
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace fedsim
