#pragma once

#include <cstdint>

#include "gel/numeric.hpp"

namespace gel {

// Adam hyperparameters. Defaults are the commonly recommended values.
struct AdamConfig {
  double alpha = 0.9;     // first-moment decay
  double beta = 0.999;    // second-moment decay
  double epsilon = 0.001; // learning rate
  double delta = 1e-8;    // added after the square root

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// Adam moments and step counter. The counter advances on every step,
// whether the gradient was freshly computed or reused as a guess.
struct AdamState {
  Vector v1;
  Vector v2;
  std::uint64_t t = 0;
  AdamConfig config;

  static AdamState fresh(std::size_t n, AdamConfig config = {});
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamStep {
  Vector delta_w;
  AdamState state;
};

// One bias-corrected Adam step:
//   v1 <- alpha v1 + (1 - alpha) g
//   v2 <- beta v2 + (1 - beta) g*g
//   t  <- t + 1
//   dw  = -epsilon * (v1 / (1 - alpha^t)) / (sqrt(v2 / (1 - beta^t)) + delta)
// The caller applies w <- w + dw. The step does not know or care whether
// `grad` is a fresh gradient or the last one reused.
AdamStep adam_gradient_step(AdamState state, const Vector& grad);

// Plain SGD update: dw = -epsilon * grad. epsilon must be positive.
Vector sgd_step(const Vector& grad, double epsilon);

struct MomentumState {
  Vector v;
  double alpha = 0.9;
  double epsilon = 0.01;

  static MomentumState fresh(std::size_t n, double alpha, double epsilon);
};

struct MomentumStep {
  Vector delta_w;
  MomentumState state;
};

// v <- alpha v - epsilon grad; dw = v.
MomentumStep momentum_step(MomentumState state, const Vector& grad);

struct RmsPropState {
  Vector v2;
  double beta = 0.999;
  double epsilon = 0.001;
  double delta = 1e-8;

  static RmsPropState fresh(std::size_t n, double beta, double epsilon, double delta = 1e-8);
};

struct RmsPropStep {
  Vector delta_w;
  RmsPropState state;
};

// v2 <- beta v2 + (1 - beta) grad*grad; dw = -epsilon grad / (sqrt(v2) + delta).
RmsPropStep rmsprop_step(RmsPropState state, const Vector& grad);

}  // namespace gel
