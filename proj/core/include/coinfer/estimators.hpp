#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "coinfer/models.hpp"

namespace coinfer {

struct UkfParams {
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 0.0;

  // gamma 0 and gamma 1 both select (alpha, beta, kappa) = (1, 2, 0).
  static UkfParams preset(int gamma);
  double lambda(Eigen::Index l) const { return alpha * alpha * (static_cast<double>(l) + kappa) - static_cast<double>(l); }
};

struct SigmaSet {
  Matrix points;  // L x (2L+1)
  Vector w_mean;
  Vector w_cov;
};

SigmaSet ukf_sigma_points(const GaussianBelief& belief, const UkfParams& params);

using JacobianFn = std::function<Matrix(const Vector& x, const Vector& u)>;

struct Jacobians {
  JacobianFn transition;   // d f / d x of the discrete map
  JacobianFn measurement;  // d h / d x
};

// Central differences with step max(1e-6, 1e-6 |x_k|).
Matrix numeric_jacobian(const std::function<Vector(const Vector&, const Vector&)>& fn, const Vector& x,
                        const Vector& u);

// Prediction and correction halves; schedules call these directly so that
// the propagated map and process noise can be substituted per step.
GaussianBelief kf_predict(const LinearForm& lin, const GaussianBelief& b, const Vector& u, const Matrix& q);
GaussianBelief kf_update(const LinearForm& lin, const GaussianBelief& b, const Vector& u, const Vector& y,
                         const Matrix& r, const std::vector<Eigen::Index>& angle_outputs = {});

GaussianBelief ekf_predict(const Transition& f, const JacobianFn& jac, const GaussianBelief& b, const Vector& u,
                           const Matrix& q);
GaussianBelief ekf_update(const Measurement& h, const JacobianFn& jac, const GaussianBelief& b, const Vector& u,
                          const Vector& y, const Matrix& r, const std::vector<Eigen::Index>& angle_outputs = {});

GaussianBelief ukf_predict(const Transition& f, const GaussianBelief& b, const Vector& u, const Matrix& q,
                           const UkfParams& params);
GaussianBelief ukf_update(const Measurement& h, const GaussianBelief& b, const Vector& u, const Vector& y,
                          const Matrix& r, const UkfParams& params,
                          const std::vector<Eigen::Index>& angle_outputs = {});

// Full predict/update against a model. An empty y skips the correction.
GaussianBelief kf_step(const StateSpaceModel& model, const GaussianBelief& b, const Vector& u, const Vector& y);
GaussianBelief ekf_step(const StateSpaceModel& model, const GaussianBelief& b, const Vector& u, const Vector& y,
                        const std::optional<Jacobians>& jacobians = std::nullopt);
GaussianBelief ukf_step(const StateSpaceModel& model, const GaussianBelief& b, const Vector& u, const Vector& y,
                        const UkfParams& params = {});

// One weighted least-squares correction around x_pred with weights R^-1.
Vector wls_step(const StateSpaceModel& model, const Vector& x_pred, const Vector& u, const Vector& y,
                const JacobianFn& jac = {});

struct WnlsOptions {
  int iterations = 5;
  double damping = 0.5;
  int max_backtracks = 30;
};

// Damped Gauss-Newton: re-linearises each iteration; steps shrink by `damping`
// until the weighted residual does not increase.
Vector wnls_step(const StateSpaceModel& model, const Vector& x_pred, const Vector& u, const Vector& y,
                 const WnlsOptions& opts = {}, const JacobianFn& jac = {});

// Symmetrize and give back a belief; used by every filter on exit.
GaussianBelief finalize_belief(Vector mean, Matrix cov);

}  // namespace coinfer
