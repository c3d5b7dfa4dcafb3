#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "coinfer/numerics.hpp"

namespace coinfer {

struct GaussianBelief {
  Vector mean;
  Matrix cov;

  GaussianBelief() = default;
  // Rejects dimension mismatch and asymmetry beyond 1e-10.
  GaussianBelief(Vector m, Matrix c);

  Eigen::Index dim() const noexcept { return mean.size(); }
};

enum class IntegratorKind { Euler, Heun, AB2 };

using Derivative = std::function<Vector(const Vector& x, const Vector& u)>;
using Transition = std::function<Vector(const Vector& x, const Vector& u)>;
using Measurement = std::function<Vector(const Vector& x, const Vector& u)>;

struct StepResult {
  Vector next;
  Vector f;  // derivative at the input state
};

// AB2 without prev_f performs the Heun bootstrap step.
StepResult integrate_step(IntegratorKind kind, const Derivative& f, const Vector& x, const Vector& u, double dt,
                          const Vector* prev_f = nullptr);

// Appends random-walk parameters with block-diagonal prior covariance.
GaussianBelief augment_belief(const GaussianBelief& belief, const Vector& param_means, const Vector& param_vars);

Vector mvn_sample(const GaussianBelief& belief, Rng& rng);

// x' = M x + B u,  y = H x + D u
struct LinearForm {
  Matrix m, b, h, d;
};

struct StateSpaceModel {
  Eigen::Index state_dim = 0;
  Eigen::Index input_dim = 0;
  Eigen::Index obs_dim = 0;
  double dt = 0.0;
  IntegratorKind integrator = IntegratorKind::Heun;

  Derivative derivative;    // continuous models
  Transition transition;    // discrete map; overrides derivative when set
  Measurement measurement;  // may be empty for unobserved nodes
  Matrix q;
  Matrix r;
  std::optional<LinearForm> linear;

  std::vector<Eigen::Index> angle_states;   // wrapped to (-pi, pi] after updates
  std::vector<Eigen::Index> angle_outputs;  // innovations wrapped on these channels

  bool continuous() const { return static_cast<bool>(derivative); }
  Vector propagate(const Vector& x, const Vector& u) const;
  Vector observe(const Vector& x, const Vector& u) const;
};

void validate(const StateSpaceModel& model);

// One-step discrete map from a continuous model with the given integrator.
Transition discretize(const Derivative& f, IntegratorKind kind, double dt);

void wrap_states(Vector& x, const std::vector<Eigen::Index>& idx);

}  // namespace coinfer
