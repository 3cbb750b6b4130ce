#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gel/numeric.hpp"

namespace gel {

struct LayerShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t count() const noexcept { return rows * cols; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

using ParameterShape = std::vector<LayerShape>;

std::size_t element_count(const ParameterShape& shape);

// Flat model weights plus the layer layout needed to unflatten them.
// Two parameter vectors may only be combined when their shapes match.
struct ParameterVector {
  Vector values;
  ParameterShape shape;

  ParameterVector() = default;
  ParameterVector(Vector v, ParameterShape s);

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

void require_same_shape(const ParameterVector& a, const ParameterVector& b, std::string_view what);

// Read-only view over row-major samples.
struct SampleView {
  std::span<const double> features;  // rows * dim
  std::span<const int> labels;       // rows
  std::size_t dim = 0;

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const noexcept { return features.subspan(i * dim, dim); }
};

// A set of labelled samples; every entry carries a dataset-wide id so that
// shard disjointness can be checked after repartitioning.
struct Samples {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::uint64_t> ids;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  void push_back(std::span<const double> x, int label, std::uint64_t id);
  SampleView view() const noexcept { return {features, labels, dim}; }
  friend bool operator==(const Samples&, const Samples&) = default;
};

// A mini-batch drawn from a shard's train split.
struct Batch {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  SampleView view() const noexcept { return {features, labels, dim}; }
};

// One client's local data, already split into train and test partitions.
struct ClientShard {
  std::size_t client_id = 0;
  Samples train;
  Samples test;

  std::size_t sample_count() const noexcept { return train.size() + test.size(); }
  friend bool operator==(const ClientShard&, const ClientShard&) = default;
};

struct LossGrad {
  double loss = 0.0;
  ParameterVector grad;
};

// Multinomial logistic regression. Parameters: weights (d x C) then bias (C).
ParameterShape logreg_shape(std::size_t features, std::size_t classes);
LossGrad logreg_loss_grad(const ParameterVector& params, const SampleView& batch);
double logreg_loss(const ParameterVector& params, const SampleView& batch);

// One hidden tanh layer with softmax output.
// Parameters: W1 (d x hidden), b1 (hidden), W2 (hidden x C), b2 (C).
ParameterShape mlp_shape(std::size_t features, std::size_t hidden, std::size_t classes);
LossGrad mlp_loss_grad(const ParameterVector& params, const SampleView& batch, std::size_t hidden);
double mlp_loss(const ParameterVector& params, const SampleView& batch, std::size_t hidden);

enum class ModelKind { logistic_regression, mlp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Which model to train and its dimensions.
struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  std::size_t features = 0;
  std::size_t classes = 0;
  std::size_t hidden = 20;

  ParameterShape shape() const;
  ParameterVector zeros() const;
  // Weights ~ N(0, 1/sqrt(fan_in)), biases zero.
  ParameterVector initialize(RngStream& stream) const;

  // Analytic loss and gradient. Each call counts as one gradient evaluation.
  LossGrad loss_grad(const ParameterVector& params, const SampleView& batch) const;
  // Forward pass only; not counted.
  double loss(const ParameterVector& params, const SampleView& batch) const;
  // Argmax class per row; ties go to the lowest class index.
  std::vector<int> predict(const ParameterVector& params, const SampleView& batch) const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Process-wide count of analytic gradient evaluations (ModelSpec::loss_grad,
// logreg_loss_grad, mlp_loss_grad). Thread-safe.
std::uint64_t gradient_evaluations() noexcept;

enum class Split { train, test };

// Pooled fraction of correctly classified samples in the chosen split.
// Throws EvaluationError when the split is empty across all shards.
double accuracy(const ModelSpec& model, const ParameterVector& params,
                std::span<const ClientShard> shards, Split split);

// Pooled mean cross-entropy over the chosen split.
double pooled_loss(const ModelSpec& model, const ParameterVector& params,
                   std::span<const ClientShard> shards, Split split);

// Central differences (f(w + h e_i) - f(w - h e_i)) / 2h per coordinate.
Vector finite_diff_grad(const std::function<double(const Vector&)>& objective, const Vector& w,
                        double h);
ParameterVector finite_diff_grad(const ModelSpec& model, const ParameterVector& params,
                                 const SampleView& batch, double h);

}  // namespace gel
