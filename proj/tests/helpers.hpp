#pragma once

#include <cmath>

#include "coinfer/coinfer.hpp"

namespace th {

using coinfer::Matrix;
using coinfer::Vector;

inline double max_abs(const Matrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

inline Matrix random_spd(Eigen::Index n, coinfer::Rng& rng, double floor = 0.1) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + floor * Matrix::Identity(n, n);
}

// Random stable linear-Gaussian model, transition/measurement maps and linear form agree.
inline coinfer::StateSpaceModel random_linear_model(Eigen::Index n, Eigen::Index m, coinfer::Rng& rng) {
  coinfer::LinearForm lf;
  lf.m = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) lf.m(i, j) += 0.05 * rng.normal();
  lf.b = Matrix::Zero(n, 1);
  lf.b(0, 0) = 0.1;
  lf.h = Matrix(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) lf.h(i, j) = rng.normal();
  lf.d = Matrix::Zero(m, 1);
  coinfer::StateSpaceModel model;
  model.state_dim = n;
  model.input_dim = 1;
  model.obs_dim = m;
  model.dt = 0.1;
  model.linear = lf;
  model.transition = [lf](const Vector& x, const Vector& u) { return Vector(lf.m * x + lf.b * u); };
  model.measurement = [lf](const Vector& x, const Vector& u) { return Vector(lf.h * x + lf.d * u); };
  model.q = 1e-3 * Matrix::Identity(n, n);
  model.r = 0.05 * Matrix::Identity(m, m);
  return model;
}

}  // namespace th
