// SPDX-License-Identifier: Apache-2.0
#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

std::size_t Population::total_n() const noexcept {
  std::size_t n = 0;
  for (const auto& c : clients) n += c.n_k();
  return n;
}

std::vector<Example> Population::pooled() const {
  std::vector<Example> all;
  all.reserve(total_n());
  for (const auto& c : clients) all.insert(all.end(), c.examples.begin(), c.examples.end());
  return all;
}

void PopulationParams::validate() const {
  if (num_clients == 0) throw std::invalid_argument("population.num_clients must be >= 1");
  if (feature_dim == 0) throw std::invalid_argument("population feature_dim must be >= 1");
  if (num_classes == 0) throw std::invalid_argument("population num_classes must be >= 1");
  if (!(cluster_spread >= 0.0) || !std::isfinite(cluster_spread)) {
    throw std::invalid_argument("population.cluster_spread must be finite and >= 0");
  }
  if (!(center_scale >= 0.0) || !std::isfinite(center_scale)) {
    throw std::invalid_argument("population.center_scale must be finite and >= 0");
  }
  if (!(label_sharpness > 0.0) || !std::isfinite(label_sharpness)) {
    throw std::invalid_argument("population.label_sharpness must be finite and > 0");
  }
  if (!(eval_fraction >= 0.0) || !std::isfinite(eval_fraction)) {
    throw std::invalid_argument("population.eval_fraction must be finite and >= 0");
  }
  if (const auto* ln = std::get_if<LognormalCounts>(&counts)) {
    if (!std::isfinite(ln->mu) || !(ln->sigma >= 0.0) || !std::isfinite(ln->sigma)) {
      throw std::invalid_argument("population lognormal counts need finite mu and sigma >= 0");
    }
  } else if (std::get<FixedCounts>(counts).n == 0) {
    throw std::invalid_argument("population.fixed_n must be >= 1");
  }
}

namespace {

struct Teacher {
  std::vector<double> hidden;  // [teacher_hidden][feature_dim], empty for a linear teacher
  std::vector<double> hidden_bias;
  std::vector<double> weights;  // [outputs][teacher_hidden or feature_dim]
  std::size_t outputs = 1;
};

void fill_normal(std::vector<double>& v, std::size_t n, double scale, rng::Stream& stream) {
  v.resize(n);
  for (double& w : v) w = scale * stream.normal();
}

Teacher make_teacher(const PopulationParams& p, std::uint64_t seed) {
  rng::Stream stream(seed, rng::Purpose::kTeacher);
  Teacher t;
  t.outputs = p.num_classes;
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(p.feature_dim));
  if (p.teacher_hidden == 0) {
    fill_normal(t.weights, t.outputs * p.feature_dim, in_scale, stream);
    return t;
  }
  fill_normal(t.hidden, p.teacher_hidden * p.feature_dim, in_scale, stream);
  fill_normal(t.hidden_bias, p.teacher_hidden, 1.0, stream);
  fill_normal(t.weights, t.outputs * p.teacher_hidden, 1.0 / std::sqrt(static_cast<double>(p.teacher_hidden)),
              stream);
  return t;
}

std::vector<double> teacher_logits(const Teacher& t, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  if (!t.hidden.empty()) {
    std::vector<double> h(t.hidden_bias);
    for (std::size_t j = 0; j < h.size(); ++j) {
      for (std::size_t i = 0; i < x.size(); ++i) h[j] += t.hidden[j * x.size() + i] * x[i];
      h[j] = std::tanh(h[j]);
    }
    a = std::move(h);
  }
  std::vector<double> z(t.outputs, 0.0);
  for (std::size_t o = 0; o < t.outputs; ++o) {
    for (std::size_t i = 0; i < a.size(); ++i) z[o] += t.weights[o * a.size() + i] * a[i];
  }
  return z;
}

double teacher_label(const Teacher& t, const PopulationParams& p, std::span<const double> x,
                     rng::Stream& stream) {
  const std::vector<double> z = teacher_logits(t, x);
  if (p.num_classes == 1) return z[0] + stream.normal() / p.label_sharpness;

  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> prob(z.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    prob[c] = std::exp(p.label_sharpness * (z[c] - top));
    sum += prob[c];
  }
  double u = stream.uniform() * sum;
  for (std::size_t c = 0; c < z.size(); ++c) {
    u -= prob[c];
    if (u < 0.0) return static_cast<double>(c);
  }
  return static_cast<double>(z.size() - 1);
}

std::size_t draw_count(const CountDistribution& dist, rng::Stream& stream) {
  if (const auto* fixed = std::get_if<FixedCounts>(&dist)) return fixed->n;
  const auto& ln = std::get<LognormalCounts>(dist);
  const double draw = std::round(std::exp(ln.mu + ln.sigma * stream.normal()));
  return draw < 1.0 ? 1 : static_cast<std::size_t>(draw);
}

Example draw_example(const Teacher& t, const PopulationParams& p, const std::vector<double>& center,
                     rng::Stream& stream) {
  Example ex;
  ex.features.resize(p.feature_dim);
  for (std::size_t i = 0; i < p.feature_dim; ++i) {
    ex.features[i] = center[i] + p.cluster_spread * stream.normal();
  }
  ex.label = teacher_label(t, p, ex.features, stream);
  return ex;
}

}  // namespace

Population generate_population(const PopulationParams& params, std::uint64_t seed) {
  params.validate();
  const Teacher teacher = make_teacher(params, seed);
  Population pop;
  pop.feature_dim = params.feature_dim;
  pop.clients.resize(params.num_clients);
  for (std::size_t k = 0; k < params.num_clients; ++k) {
    rng::Stream stream(seed, rng::Purpose::kPopulation, 0, k);
    const std::size_t n = draw_count(params.counts, stream);
    std::vector<double> center(params.feature_dim);
    for (double& c : center) c = params.center_scale * stream.normal();

    ClientDataset& client = pop.clients[k];
    client.client_id = static_cast<int>(k);
    client.examples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) client.examples.push_back(draw_example(teacher, params, center, stream));

    rng::Stream held_stream(seed, rng::Purpose::kHeldOut, 0, k);
    const auto held = static_cast<std::size_t>(std::round(params.eval_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < held; ++i) {
      pop.held_out.push_back(draw_example(teacher, params, center, held_stream));
    }
  }
  return pop;
}

std::vector<int> select_clients(std::size_t num_clients, std::size_t k, std::uint64_t round,
                                std::uint64_t seed) {
  if (k == 0 || k > num_clients) {
    throw std::invalid_argument("select_clients: K=" + std::to_string(k) +
                                " must be in [1, M] with M=" + std::to_string(num_clients));
  }
  rng::Stream stream(seed, rng::Purpose::kSelection, round);
  const auto picked = stream.sample_without_replacement(num_clients, k);
  return {picked.begin(), picked.end()};
}

std::vector<int> select_clients(const Population& pop, std::size_t k, std::uint64_t round,
                                std::uint64_t seed) {
  return select_clients(pop.num_clients(), k, round, seed);
}

BatchStream sample_client_batchstream(const ClientDataset& client, const SamplingPolicy& policy,
                                      std::size_t local_epochs, std::size_t batch_size,
                                      std::uint64_t round, std::uint64_t seed) {
  if (local_epochs == 0) throw std::invalid_argument("local_epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (policy.data_limit && *policy.data_limit == 0) throw std::invalid_argument("data_limit must be >= 1");

  rng::Stream stream(seed, rng::Purpose::kBatches, round, static_cast<std::uint64_t>(client.client_id));
  const std::size_t n = client.n_k();
  const std::size_t used = policy.data_limit ? std::min(*policy.data_limit, n) : n;
  std::vector<std::size_t> subset = stream.sample_without_replacement(n, used);

  BatchStream out;
  out.examples_used = used;
  for (std::size_t epoch = 0; epoch < local_epochs; ++epoch) {
    stream.shuffle(subset);
    for (std::size_t start = 0; start < used; start += batch_size) {
      const std::size_t stop = std::min(used, start + batch_size);
      std::vector<Example> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(client.examples[subset[i]]);
      out.batches.push_back(std::move(batch));
    }
  }
  return out;
}

std::vector<ClientDataset> make_iid_shards(const Population& pop, std::size_t k,
                                           std::size_t shard_size, std::uint64_t round,
                                           std::uint64_t seed) {
  if (k == 0 || shard_size == 0) throw std::invalid_argument("make_iid_shards: K and shard_size must be >= 1");
  const std::size_t total = pop.total_n();
  if (k * shard_size > total) {
    throw std::invalid_argument("make_iid_shards: K*shard_size=" + std::to_string(k * shard_size) +
                                " exceeds pooled examples " + std::to_string(total));
  }
  // Flat index over clients in id order.
  std::vector<std::pair<std::size_t, std::size_t>> where;
  where.reserve(total);
  for (std::size_t c = 0; c < pop.clients.size(); ++c) {
    for (std::size_t i = 0; i < pop.clients[c].n_k(); ++i) where.emplace_back(c, i);
  }
  rng::Stream stream(seed, rng::Purpose::kIidShards, round);
  const auto picked = stream.sample_without_replacement(total, k * shard_size);

  std::vector<ClientDataset> shards(k);
  for (std::size_t s = 0; s < k; ++s) {
    shards[s].client_id = static_cast<int>(s);
    shards[s].examples.reserve(shard_size);
    for (std::size_t j = 0; j < shard_size; ++j) {
      const auto [c, i] = where[picked[s * shard_size + j]];
      shards[s].examples.push_back(pop.clients[c].examples[i]);
    }
  }
  return shards;
}

void write_population(const Population& pop, std::ostream& out) {
  out << pop.num_clients() << ' ' << pop.feature_dim << '\n';
  char buf[32];
  for (const auto& client : pop.clients) {
    for (const auto& ex : client.examples) {
      out << client.client_id;
      for (double f : ex.features) {
        std::snprintf(buf, sizeof(buf), "%.17g", f);
        out << ' ' << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", ex.label);
      out << ' ' << buf << '\n';
    }
  }
}

Population read_population(std::istream& in) {
  std::string line;
  std::size_t num_clients = 0;
  std::size_t dim = 0;
  if (!std::getline(in, line)) throw std::runtime_error("population file: missing header");
  {
    std::istringstream header(line);
    if (!(header >> num_clients >> dim) || num_clients == 0 || dim == 0) {
      throw std::runtime_error("population file: malformed header '" + line + "'");
    }
  }
  Population pop;
  pop.feature_dim = dim;
  pop.clients.resize(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) pop.clients[k].client_id = static_cast<int>(k);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    long long id = -1;
    Example ex;
    ex.features.resize(dim);
    bool ok = static_cast<bool>(row >> id);
    for (std::size_t i = 0; ok && i < dim; ++i) ok = static_cast<bool>(row >> ex.features[i]);
    ok = ok && static_cast<bool>(row >> ex.label);
    std::string extra;
    if (!ok || (row >> extra) || id < 0 || static_cast<std::size_t>(id) >= num_clients) {
      throw std::runtime_error("population file: malformed line " + std::to_string(line_no));
    }
    pop.clients[static_cast<std::size_t>(id)].examples.push_back(std::move(ex));
  }
  for (const auto& c : pop.clients) {
    if (c.n_k() == 0) {
      throw std::runtime_error("population file: client " + std::to_string(c.client_id) + " has no examples");
    }
  }
  return pop;
}

}  // namespace fedsim
