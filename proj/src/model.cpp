// SPDX-License-Identifier: Apache-2.0
#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinear:
      return "linear";
    case ModelKind::kLogistic:
      return "logistic";
    case ModelKind::kMlp:
      return "mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "linear") return ModelKind::kLinear;
  if (text == "logistic") return ModelKind::kLogistic;
  if (text == "mlp") return ModelKind::kMlp;
  throw std::invalid_argument("unknown model kind '" + std::string(text) +
                              "' (expected linear, logistic or mlp)");
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("model.input_dim must be positive");
  if (num_classes == 0) throw std::invalid_argument("model.num_classes must be positive");
  switch (kind) {
    case ModelKind::kLinear:
      if (num_classes != 1) throw std::invalid_argument("model.num_classes must be 1 for linear");
      if (hidden_dim != 0) throw std::invalid_argument("model.hidden_dim must be 0 for linear");
      break;
    case ModelKind::kLogistic:
      if (num_classes < 2) throw std::invalid_argument("model.num_classes must be >= 2 for logistic");
      if (hidden_dim != 0) throw std::invalid_argument("model.hidden_dim must be 0 for logistic");
      break;
    case ModelKind::kMlp:
      if (num_classes < 2) throw std::invalid_argument("model.num_classes must be >= 2 for mlp");
      if (hidden_dim == 0) throw std::invalid_argument("model.hidden_dim must be positive for mlp");
      break;
  }
}

std::size_t param_count(const ModelSpec& spec) {
  if (spec.kind == ModelKind::kMlp) {
    return spec.input_dim * spec.hidden_dim + spec.hidden_dim + spec.hidden_dim * spec.num_classes +
           spec.num_classes;
  }
  return spec.input_dim * spec.num_classes + spec.num_classes;
}

namespace {

void check_inputs(const ModelSpec& spec, const ParamVector& w, std::span<const Example> batch) {
  if (w.dim() != param_count(spec)) {
    throw std::invalid_argument("parameter dimension " + std::to_string(w.dim()) +
                                " does not match model parameter count " +
                                std::to_string(param_count(spec)));
  }
  if (batch.empty()) throw std::invalid_argument("batch is empty");
  for (const Example& ex : batch) {
    if (ex.features.size() != spec.input_dim) {
      throw std::invalid_argument("example feature dimension " + std::to_string(ex.features.size()) +
                                  " does not match model input_dim " +
                                  std::to_string(spec.input_dim));
    }
    if (spec.is_classifier()) {
      if (!(ex.label >= 0.0) || ex.label >= static_cast<double>(spec.num_classes) ||
          ex.label != std::floor(ex.label)) {
        throw std::invalid_argument("class label out of range");
      }
    } else if (!std::isfinite(ex.label)) {
      throw std::invalid_argument("regression label is not finite");
    }
  }
}

// Affine map out[o] = b[o] + sum_i W[o][i] * in[i]; W at `offset`, b right after.
void affine(std::span<const double> p, std::size_t offset, std::span<const double> in,
            std::span<double> out) {
  const std::size_t n_in = in.size();
  const std::size_t bias = offset + out.size() * n_in;
  for (std::size_t o = 0; o < out.size(); ++o) {
    double acc = p[bias + o];
    const std::size_t row = offset + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) acc += p[row + i] * in[i];
    out[o] = acc;
  }
}

// Accumulate the affine layer's parameter gradient: dW += scale * dout x in^T, db += scale * dout.
void affine_backward(std::span<double> grad, std::size_t offset, std::span<const double> in,
                     std::span<const double> dout, double scale) {
  const std::size_t n_in = in.size();
  const std::size_t bias = offset + dout.size() * n_in;
  for (std::size_t o = 0; o < dout.size(); ++o) {
    const double d = scale * dout[o];
    const std::size_t row = offset + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) grad[row + i] += d * in[i];
    grad[bias + o] += d;
  }
}

// Softmax cross-entropy for one example; writes d(loss)/d(logits) into dlogits.
double softmax_xent(std::span<const double> logits, std::size_t label, std::span<double> dlogits) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  const double log_norm = max_logit + std::log(sum);
  for (std::size_t c = 0; c < logits.size(); ++c) {
    dlogits[c] = std::exp(logits[c] - log_norm) - (c == label ? 1.0 : 0.0);
  }
  return log_norm - logits[label];
}

struct Workspace {
  std::vector<double> hidden;
  std::vector<double> out;
  std::vector<double> dout;
  std::vector<double> dhidden;
};

// Loss of one example; when `grad` is non-empty, adds `scale` * d(loss)/dw into it.
double example_loss(const ModelSpec& spec, std::span<const double> p, const Example& ex,
                    Workspace& ws, std::span<double> grad, double scale) {
  ws.out.assign(spec.num_classes, 0.0);
  ws.dout.assign(spec.num_classes, 0.0);
  const std::span<const double> x(ex.features);

  if (spec.kind != ModelKind::kMlp) {
    affine(p, 0, x, ws.out);
    double l = 0.0;
    if (spec.kind == ModelKind::kLinear) {
      const double r = ws.out[0] - ex.label;
      l = r * r;
      ws.dout[0] = 2.0 * r;
    } else {
      l = softmax_xent(ws.out, static_cast<std::size_t>(ex.label), ws.dout);
    }
    if (!grad.empty()) affine_backward(grad, 0, x, ws.dout, scale);
    return l;
  }

  const std::size_t h = spec.hidden_dim;
  const std::size_t second = spec.input_dim * h + h;
  ws.hidden.assign(h, 0.0);
  affine(p, 0, x, ws.hidden);
  for (double& a : ws.hidden) a = std::tanh(a);
  affine(p, second, ws.hidden, ws.out);
  const double l = softmax_xent(ws.out, static_cast<std::size_t>(ex.label), ws.dout);
  if (!grad.empty()) {
    affine_backward(grad, second, ws.hidden, ws.dout, scale);
    ws.dhidden.assign(h, 0.0);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      const std::size_t row = second + c * h;
      for (std::size_t j = 0; j < h; ++j) ws.dhidden[j] += p[row + j] * ws.dout[c];
    }
    for (std::size_t j = 0; j < h; ++j) ws.dhidden[j] *= 1.0 - ws.hidden[j] * ws.hidden[j];
    affine_backward(grad, 0, x, ws.dhidden, scale);
  }
  return l;
}

}  // namespace

double loss(const ModelSpec& spec, const ParamVector& w, std::span<const Example> batch) {
  check_inputs(spec, w, batch);
  Workspace ws;
  double total = 0.0;
  for (const Example& ex : batch) total += example_loss(spec, w.values(), ex, ws, {}, 0.0);
  return total / static_cast<double>(batch.size());
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& w, std::span<const Example> batch) {
  check_inputs(spec, w, batch);
  Workspace ws;
  std::vector<double> grad(w.dim(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const Example& ex : batch) example_loss(spec, w.values(), ex, ws, grad, scale);
  return ParamVector(std::move(grad));
}

ParamVector finite_diff_gradient(const ModelSpec& spec, const ParamVector& w,
                                 std::span<const Example> batch, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  check_inputs(spec, w, batch);
  ParamVector probe = w;
  std::vector<double> grad(w.dim(), 0.0);
  for (std::size_t i = 0; i < w.dim(); ++i) {
    probe[i] = w[i] + h;
    const double up = loss(spec, probe, batch);
    probe[i] = w[i] - h;
    const double down = loss(spec, probe, batch);
    probe[i] = w[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return ParamVector(std::move(grad));
}

std::vector<double> forward(const ModelSpec& spec, const ParamVector& w,
                            std::span<const double> features) {
  if (w.dim() != param_count(spec)) throw std::invalid_argument("forward: parameter dimension mismatch");
  if (features.size() != spec.input_dim) throw std::invalid_argument("forward: feature dimension mismatch");
  std::vector<double> out(spec.num_classes, 0.0);
  if (spec.kind != ModelKind::kMlp) {
    affine(w.values(), 0, features, out);
    return out;
  }
  std::vector<double> hidden(spec.hidden_dim, 0.0);
  affine(w.values(), 0, features, hidden);
  for (double& a : hidden) a = std::tanh(a);
  affine(w.values(), spec.input_dim * spec.hidden_dim + spec.hidden_dim, hidden, out);
  return out;
}

double accuracy(const ModelSpec& spec, const ParamVector& w, std::span<const Example> batch) {
  if (!spec.is_classifier()) throw std::invalid_argument("accuracy is undefined for regression");
  check_inputs(spec, w, batch);
  std::size_t correct = 0;
  for (const Example& ex : batch) {
    const auto logits = forward(spec, w, ex.features);
    const auto best = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == static_cast<std::size_t>(ex.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

ParamVector init_weights(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  rng::Stream stream(seed, rng::Purpose::kInit);
  std::vector<double> p(param_count(spec), 0.0);
  auto fill_layer = [&](std::size_t offset, std::size_t n_in, std::size_t n_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (std::size_t i = 0; i < n_in * n_out; ++i) p[offset + i] = stream.uniform(-bound, bound);
  };
  if (spec.kind == ModelKind::kMlp) {
    fill_layer(0, spec.input_dim, spec.hidden_dim);
    fill_layer(spec.input_dim * spec.hidden_dim + spec.hidden_dim, spec.hidden_dim, spec.num_classes);
  } else {
    fill_layer(0, spec.input_dim, spec.num_classes);
  }
  return ParamVector(std::move(p));
}

}  // namespace fedsim
