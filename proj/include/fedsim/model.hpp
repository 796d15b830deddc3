// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/param_vector.hpp"

namespace fedsim {

/// One labeled example. For regression the label is the real target; for
/// classification it holds the class index.
struct Example {
  std::vector<double> features;
  double label = 0.0;

  friend bool operator==(const Example&, const Example&) = default;
};

enum class ModelKind { kLinear, kLogistic, kMlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Toy model description.
///
/// Parameter layout (row-major, all in one flat vector):
///   linear / logistic:  W[num_classes][input_dim], b[num_classes]
///   mlp:                W1[hidden_dim][input_dim], b1[hidden_dim],
///                       W2[num_classes][hidden_dim], b2[num_classes]
///
/// linear is scalar regression (num_classes == 1) with squared error.
/// logistic and mlp are softmax classifiers (num_classes >= 2) trained with
/// cross-entropy; the mlp hidden activation is tanh.
struct ModelSpec {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;
  std::size_t num_classes = 2;

  /// Throws std::invalid_argument describing the first violated field.
  void validate() const;
  bool is_classifier() const noexcept { return kind != ModelKind::kLinear; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::size_t param_count(const ModelSpec& spec);

/// Mean per-example loss over the batch.
double loss(const ModelSpec& spec, const ParamVector& w, std::span<const Example> batch);

/// Exact gradient of `loss` with respect to w.
ParamVector gradient(const ModelSpec& spec, const ParamVector& w, std::span<const Example> batch);

/// Central-difference gradient of `loss`; test oracle for `gradient`.
ParamVector finite_diff_gradient(const ModelSpec& spec, const ParamVector& w,
                                 std::span<const Example> batch, double h = 1e-5);

/// Raw model outputs (regression value, or class logits) for one input.
std::vector<double> forward(const ModelSpec& spec, const ParamVector& w,
                            std::span<const double> features);

/// Fraction of examples whose argmax logit equals the label. Only meaningful
/// for classifiers; throws for linear regression.
double accuracy(const ModelSpec& spec, const ParamVector& w, std::span<const Example> batch);

/// Deterministic scaled-uniform initialization: each weight matrix entry is
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases start at zero.
ParamVector init_weights(const ModelSpec& spec, std::uint64_t seed);

}  // namespace fedsim
