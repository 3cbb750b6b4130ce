#include "gel/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

#include "gel/errors.hpp"

namespace gel {
namespace {

std::atomic<std::uint64_t> g_gradient_evaluations{0};

struct LogregDims {
  std::size_t features;
  std::size_t classes;
};

LogregDims logreg_dims(const ParameterVector& params) {
  const auto& s = params.shape;
  if (s.size() != 2 || s[0].name != "weights" || s[1].name != "bias" || s[1].rows != 1 ||
      s[1].cols != s[0].cols) {
    throw DimensionError("logistic regression: unexpected parameter shape");
  }
  return {s[0].rows, s[0].cols};
}

struct MlpDims {
  std::size_t features;
  std::size_t hidden;
  std::size_t classes;
};

MlpDims mlp_dims(const ParameterVector& params, std::size_t hidden) {
  const auto& s = params.shape;
  if (s.size() != 4) throw DimensionError("mlp: expected four parameter blocks");
  const MlpDims dims{s[0].rows, hidden, s[3].cols};
  if (params.shape != mlp_shape(dims.features, dims.hidden, dims.classes)) {
    throw DimensionError("mlp: parameter shape does not match hidden width " +
                         std::to_string(hidden));
  }
  return dims;
}

void check_batch(const SampleView& batch, std::size_t features, std::size_t classes) {
  if (batch.rows() == 0) throw DimensionError("empty batch");
  if (batch.dim != features) {
    throw DimensionError("batch feature dimension " + std::to_string(batch.dim) +
                         " does not match model input " + std::to_string(features));
  }
  if (batch.features.size() != batch.rows() * batch.dim) {
    throw DimensionError("batch feature storage does not match rows * dim");
  }
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

// Turns logits into probabilities in place and returns -log p[label].
double softmax_xent(std::span<double> logits, int label) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  const double label_logit_shifted = logits[static_cast<std::size_t>(label)] - max_logit;
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - max_logit);
    sum += z;
  }
  const double log_sum = std::log(sum);
  for (double& z : logits) z /= sum;
  return log_sum - label_logit_shifted;
}

double xent_from_logits(std::span<const double> logits, int label) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  return max_logit + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < values.size(); ++c) {
    if (values[c] > values[best]) best = c;
  }
  return best;
}

void logreg_logits(const double* w, const double* b, std::span<const double> x, std::size_t classes,
                   std::span<double> out) {
  std::copy(b, b + classes, out.begin());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    const double* wrow = w + j * classes;
    for (std::size_t c = 0; c < classes; ++c) out[c] += xj * wrow[c];
  }
}

void mlp_hidden(const double* w1, const double* b1, std::span<const double> x, std::size_t hidden,
                std::span<double> out) {
  std::copy(b1, b1 + hidden, out.begin());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    const double* wrow = w1 + j * hidden;
    for (std::size_t h = 0; h < hidden; ++h) out[h] += xj * wrow[h];
  }
  for (double& a : out) a = std::tanh(a);
}

}  // namespace

std::size_t element_count(const ParameterShape& shape) {
  std::size_t n = 0;
  for (const auto& layer : shape) n += layer.count();
  return n;
}

ParameterVector::ParameterVector(Vector v, ParameterShape s) : values(std::move(v)), shape(std::move(s)) {
  if (element_count(shape) != values.size()) {
    throw DimensionError("parameter vector length " + std::to_string(values.size()) +
                         " does not match shape total " + std::to_string(element_count(shape)));
  }
}

void require_same_shape(const ParameterVector& a, const ParameterVector& b, std::string_view what) {
  if (a.shape != b.shape || a.values.size() != b.values.size()) {
    throw DimensionError(std::string(what) + ": parameter shapes differ");
  }
}

void Samples::push_back(std::span<const double> x, int label, std::uint64_t id) {
  if (x.size() != dim) throw DimensionError("Samples::push_back: feature dimension mismatch");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  ids.push_back(id);
}

ParameterShape logreg_shape(std::size_t features, std::size_t classes) {
  return {{"weights", features, classes}, {"bias", 1, classes}};
}

ParameterShape mlp_shape(std::size_t features, std::size_t hidden, std::size_t classes) {
  return {{"w1", features, hidden}, {"b1", 1, hidden}, {"w2", hidden, classes}, {"b2", 1, classes}};
}

LossGrad logreg_loss_grad(const ParameterVector& params, const SampleView& batch) {
  const auto [d, classes] = logreg_dims(params);
  check_batch(batch, d, classes);
  g_gradient_evaluations.fetch_add(1, std::memory_order_relaxed);

  const double* w = params.values.data();
  const double* b = w + d * classes;
  LossGrad out{0.0, ParameterVector(Vector(params.size()), params.shape)};
  double* gw = out.grad.values.data();
  double* gb = gw + d * classes;

  const double inv_rows = 1.0 / static_cast<double>(batch.rows());
  std::vector<double> probs(classes);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto x = batch.row(i);
    const int y = batch.labels[i];
    logreg_logits(w, b, x, classes, probs);
    out.loss += softmax_xent(probs, y);
    probs[static_cast<std::size_t>(y)] -= 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xj = x[j] * inv_rows;
      double* grow = gw + j * classes;
      for (std::size_t c = 0; c < classes; ++c) grow[c] += xj * probs[c];
    }
    for (std::size_t c = 0; c < classes; ++c) gb[c] += probs[c] * inv_rows;
  }
  out.loss *= inv_rows;
  return out;
}

double logreg_loss(const ParameterVector& params, const SampleView& batch) {
  const auto [d, classes] = logreg_dims(params);
  check_batch(batch, d, classes);
  const double* w = params.values.data();
  const double* b = w + d * classes;
  std::vector<double> logits(classes);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    logreg_logits(w, b, batch.row(i), classes, logits);
    total += xent_from_logits(logits, batch.labels[i]);
  }
  return total / static_cast<double>(batch.rows());
}

LossGrad mlp_loss_grad(const ParameterVector& params, const SampleView& batch, std::size_t hidden) {
  const auto [d, h, classes] = mlp_dims(params, hidden);
  check_batch(batch, d, classes);
  g_gradient_evaluations.fetch_add(1, std::memory_order_relaxed);

  const double* w1 = params.values.data();
  const double* b1 = w1 + d * h;
  const double* w2 = b1 + h;
  const double* b2 = w2 + h * classes;

  LossGrad out{0.0, ParameterVector(Vector(params.size()), params.shape)};
  double* gw1 = out.grad.values.data();
  double* gb1 = gw1 + d * h;
  double* gw2 = gb1 + h;
  double* gb2 = gw2 + h * classes;

  const double inv_rows = 1.0 / static_cast<double>(batch.rows());
  std::vector<double> z(h), probs(classes), dz(h);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto x = batch.row(i);
    const int y = batch.labels[i];
    mlp_hidden(w1, b1, x, h, z);
    logreg_logits(w2, b2, z, classes, probs);
    out.loss += softmax_xent(probs, y);

    // dlogits = (p - onehot) / rows
    probs[static_cast<std::size_t>(y)] -= 1.0;
    for (double& p : probs) p *= inv_rows;

    for (std::size_t k = 0; k < h; ++k) {
      double* grow = gw2 + k * classes;
      const double* wrow = w2 + k * classes;
      double back = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        grow[c] += z[k] * probs[c];
        back += wrow[c] * probs[c];
      }
      dz[k] = back * (1.0 - z[k] * z[k]);
    }
    for (std::size_t c = 0; c < classes; ++c) gb2[c] += probs[c];
    for (std::size_t j = 0; j < d; ++j) {
      double* grow = gw1 + j * h;
      for (std::size_t k = 0; k < h; ++k) grow[k] += x[j] * dz[k];
    }
    for (std::size_t k = 0; k < h; ++k) gb1[k] += dz[k];
  }
  out.loss *= inv_rows;
  return out;
}

double mlp_loss(const ParameterVector& params, const SampleView& batch, std::size_t hidden) {
  const auto [d, h, classes] = mlp_dims(params, hidden);
  check_batch(batch, d, classes);
  const double* w1 = params.values.data();
  const double* b1 = w1 + d * h;
  const double* w2 = b1 + h;
  const double* b2 = w2 + h * classes;
  std::vector<double> z(h), logits(classes);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    mlp_hidden(w1, b1, batch.row(i), h, z);
    logreg_logits(w2, b2, z, classes, logits);
    total += xent_from_logits(logits, batch.labels[i]);
  }
  return total / static_cast<double>(batch.rows());
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic_regression:
      return "logreg";
    case ModelKind::mlp:
      return "mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "logreg" || name == "logistic_regression") return ModelKind::logistic_regression;
  if (name == "mlp") return ModelKind::mlp;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

ParameterShape ModelSpec::shape() const {
  if (features == 0 || classes < 2) throw DomainError("model needs features >= 1 and classes >= 2");
  if (kind == ModelKind::mlp) {
    if (hidden == 0) throw DomainError("mlp hidden width must be positive");
    return mlp_shape(features, hidden, classes);
  }
  return logreg_shape(features, classes);
}

ParameterVector ModelSpec::zeros() const {
  auto s = shape();
  const std::size_t n = element_count(s);
  return ParameterVector(Vector(n), std::move(s));
}

ParameterVector ModelSpec::initialize(RngStream& stream) const {
  ParameterVector p = zeros();
  std::size_t offset = 0;
  for (const auto& layer : p.shape) {
    const bool is_bias = layer.name == "bias" || layer.name == "b1" || layer.name == "b2";
    if (!is_bias) {
      const double std = 1.0 / std::sqrt(static_cast<double>(layer.rows));
      for (std::size_t i = 0; i < layer.count(); ++i) p.values[offset + i] = stream.normal(0.0, std);
    }
    offset += layer.count();
  }
  return p;
}

LossGrad ModelSpec::loss_grad(const ParameterVector& params, const SampleView& batch) const {
  if (kind == ModelKind::mlp) return mlp_loss_grad(params, batch, hidden);
  return logreg_loss_grad(params, batch);
}

double ModelSpec::loss(const ParameterVector& params, const SampleView& batch) const {
  if (kind == ModelKind::mlp) return mlp_loss(params, batch, hidden);
  return logreg_loss(params, batch);
}

std::vector<int> ModelSpec::predict(const ParameterVector& params, const SampleView& batch) const {
  std::vector<int> out(batch.rows());
  if (batch.rows() == 0) return out;
  std::vector<double> logits(classes);
  if (kind == ModelKind::mlp) {
    const auto [d, h, c] = mlp_dims(params, hidden);
    if (batch.dim != d) throw DimensionError("predict: feature dimension mismatch");
    const double* w1 = params.values.data();
    const double* b1 = w1 + d * h;
    const double* w2 = b1 + h;
    const double* b2 = w2 + h * c;
    std::vector<double> z(h);
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      mlp_hidden(w1, b1, batch.row(i), h, z);
      logreg_logits(w2, b2, z, c, logits);
      out[i] = static_cast<int>(argmax_lowest(logits));
    }
  } else {
    const auto [d, c] = logreg_dims(params);
    if (batch.dim != d) throw DimensionError("predict: feature dimension mismatch");
    const double* w = params.values.data();
    const double* b = w + d * c;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
      logreg_logits(w, b, batch.row(i), c, logits);
      out[i] = static_cast<int>(argmax_lowest(logits));
    }
  }
  return out;
}

std::uint64_t gradient_evaluations() noexcept {
  return g_gradient_evaluations.load(std::memory_order_relaxed);
}

double accuracy(const ModelSpec& model, const ParameterVector& params,
                std::span<const ClientShard> shards, Split split) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& shard : shards) {
    const Samples& s = split == Split::train ? shard.train : shard.test;
    if (s.empty()) continue;
    const auto view = s.view();
    const auto predicted = model.predict(params, view);
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == view.labels[i];
    total += s.size();
  }
  if (total == 0) throw EvaluationError("accuracy: selected split is empty");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double pooled_loss(const ModelSpec& model, const ParameterVector& params,
                   std::span<const ClientShard> shards, Split split) {
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& shard : shards) {
    const Samples& s = split == Split::train ? shard.train : shard.test;
    if (s.empty()) continue;
    weighted += model.loss(params, s.view()) * static_cast<double>(s.size());
    total += s.size();
  }
  if (total == 0) throw EvaluationError("pooled_loss: selected split is empty");
  return weighted / static_cast<double>(total);
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& objective, const Vector& w,
                        double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad: step must be positive");
  Vector grad(w.size());
  Vector probe = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = objective(probe);
    probe[i] = w[i] - h;
    const double down = objective(probe);
    probe[i] = w[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParameterVector finite_diff_grad(const ModelSpec& model, const ParameterVector& params,
                                 const SampleView& batch, double h) {
  auto objective = [&](const Vector& w) { return model.loss(ParameterVector(w, params.shape), batch); };
  return ParameterVector(finite_diff_grad(objective, params.values, h), params.shape);
}

}  // namespace gel
