#include "gel/optimizers.hpp"

#include <cmath>
#include <limits>

#include "gel/errors.hpp"

namespace gel {

AdamState AdamState::fresh(std::size_t n, AdamConfig config) {
  return AdamState{Vector(n), Vector(n), 0, config};
}

AdamStep adam_gradient_step(AdamState state, const Vector& grad) {
  require_same_length(state.v1, grad, "adam_gradient_step");
  require_same_length(state.v2, grad, "adam_gradient_step");
  if (state.t == std::numeric_limits<std::uint64_t>::max()) {
    throw DomainError("adam_gradient_step: step counter overflow");
  }
  const auto& cfg = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(cfg.alpha, t);
  const double correction2 = 1.0 - std::pow(cfg.beta, t);

  Vector delta_w(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.v1[i] = cfg.alpha * state.v1[i] + (1.0 - cfg.alpha) * g;
    state.v2[i] = cfg.beta * state.v2[i] + (1.0 - cfg.beta) * g * g;
    const double v1_hat = state.v1[i] / correction1;
    const double v2_hat = state.v2[i] / correction2;
    delta_w[i] = -cfg.epsilon * v1_hat / (std::sqrt(v2_hat) + cfg.delta);
  }
  debug_check_finite(delta_w, "adam_gradient_step");
  return {std::move(delta_w), std::move(state)};
}

Vector sgd_step(const Vector& grad, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("sgd_step: epsilon must be positive");
  Vector out(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = -epsilon * grad[i];
  return out;
}

MomentumState MomentumState::fresh(std::size_t n, double alpha, double epsilon) {
  return MomentumState{Vector(n), alpha, epsilon};
}

MomentumStep momentum_step(MomentumState state, const Vector& grad) {
  require_same_length(state.v, grad, "momentum_step");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.v[i] = state.alpha * state.v[i] - state.epsilon * grad[i];
  }
  Vector delta_w = state.v;
  return {std::move(delta_w), std::move(state)};
}

RmsPropState RmsPropState::fresh(std::size_t n, double beta, double epsilon, double delta) {
  return RmsPropState{Vector(n), beta, epsilon, delta};
}

RmsPropStep rmsprop_step(RmsPropState state, const Vector& grad) {
  require_same_length(state.v2, grad, "rmsprop_step");
  Vector delta_w(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    state.v2[i] = state.beta * state.v2[i] + (1.0 - state.beta) * g * g;
    delta_w[i] = -state.epsilon * g / (std::sqrt(state.v2[i]) + state.delta);
  }
  return {std::move(delta_w), std::move(state)};
}

}  // namespace gel
