#include "coinfer/models.hpp"

#include <cmath>

#include "coinfer/error.hpp"

namespace coinfer {

GaussianBelief::GaussianBelief(Vector m, Matrix c) : mean(std::move(m)), cov(std::move(c)) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    fail(ErrorKind::LengthMismatch, "belief covariance does not match mean dimension");
  if (!is_symmetric(cov, 1e-10)) fail(ErrorKind::InvalidArgument, "belief covariance is not symmetric");
}

StepResult integrate_step(IntegratorKind kind, const Derivative& f, const Vector& x, const Vector& u, double dt,
                          const Vector* prev_f) {
  if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "dt must be positive");
  const Vector f0 = f(x, u);
  if (!f0.allFinite()) fail(ErrorKind::NonFinite, "derivative returned non-finite values");
  StepResult out;
  out.f = f0;
  switch (kind) {
    case IntegratorKind::Euler:
      out.next = x + dt * f0;
      break;
    case IntegratorKind::AB2:
      if (prev_f) {
        out.next = x + dt * (1.5 * f0 - 0.5 * (*prev_f));
        break;
      }
      [[fallthrough]];
    case IntegratorKind::Heun: {
      const Vector pred = x + dt * f0;
      const Vector f1 = f(pred, u);
      if (!f1.allFinite()) fail(ErrorKind::NonFinite, "derivative returned non-finite values");
      out.next = x + 0.5 * dt * (f0 + f1);
      break;
    }
  }
  return out;
}

GaussianBelief augment_belief(const GaussianBelief& belief, const Vector& param_means, const Vector& param_vars) {
  if (param_means.size() != param_vars.size())
    fail(ErrorKind::LengthMismatch, "parameter means and variances differ in length");
  if ((param_vars.array() <= 0.0).any()) fail(ErrorKind::InvalidArgument, "parameter variances must be positive");
  const Eigen::Index n = belief.dim(), p = param_means.size();
  Vector m(n + p);
  m << belief.mean, param_means;
  Matrix c = Matrix::Zero(n + p, n + p);
  c.topLeftCorner(n, n) = belief.cov;
  c.bottomRightCorner(p, p) = param_vars.asDiagonal();
  return GaussianBelief(std::move(m), std::move(c));
}

Vector mvn_sample(const GaussianBelief& belief, Rng& rng) { return mvn_sample(belief.mean, belief.cov, rng); }

Vector StateSpaceModel::propagate(const Vector& x, const Vector& u) const {
  if (transition) return transition(x, u);
  if (derivative) return integrate_step(integrator, derivative, x, u, dt).next;
  if (linear) {
    Vector out = linear->m * x;
    if (linear->b.size() && u.size()) out += linear->b * u;
    return out;
  }
  fail(ErrorKind::InvalidArgument, "model has no transition");
}

Vector StateSpaceModel::observe(const Vector& x, const Vector& u) const {
  if (measurement) return measurement(x, u);
  if (linear && linear->h.size()) {
    Vector y = linear->h * x;
    if (linear->d.size() && u.size()) y += linear->d * u;
    return y;
  }
  fail(ErrorKind::InvalidArgument, "model has no measurement map");
}

void validate(const StateSpaceModel& model) {
  const auto n = model.state_dim;
  if (n <= 0) fail(ErrorKind::InvalidArgument, "state_dim must be positive");
  if (!(model.dt > 0.0)) fail(ErrorKind::InvalidArgument, "model dt must be positive");
  if (model.q.rows() != n || model.q.cols() != n) fail(ErrorKind::LengthMismatch, "q must be state_dim square");
  if (model.obs_dim > 0 && (model.r.rows() != model.obs_dim || model.r.cols() != model.obs_dim))
    fail(ErrorKind::LengthMismatch, "r must be obs_dim square");
  if (!model.transition && !model.derivative && !model.linear)
    fail(ErrorKind::InvalidArgument, "model needs a transition, derivative or linear form");
  for (auto i : model.angle_states)
    if (i < 0 || i >= n) fail(ErrorKind::IndexOutOfRange, "angle state index out of range");
  for (auto i : model.angle_outputs)
    if (i < 0 || i >= model.obs_dim) fail(ErrorKind::IndexOutOfRange, "angle output index out of range");
}

Transition discretize(const Derivative& f, IntegratorKind kind, double dt) {
  return [f, kind, dt](const Vector& x, const Vector& u) { return integrate_step(kind, f, x, u, dt).next; };
}

void wrap_states(Vector& x, const std::vector<Eigen::Index>& idx) {
  for (auto i : idx) x(i) = wrap_angle(x(i));
}

}  // namespace coinfer
