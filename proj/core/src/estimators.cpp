#include "coinfer/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "coinfer/error.hpp"

namespace coinfer {

namespace {

void wrap_entries(Vector& v, const std::vector<Eigen::Index>& idx) {
  for (auto i : idx) v(i) = wrap_angle(v(i));
}

// Solves S X = B for SPD S, returning X; throws NotSPD on failure.
Matrix spd_solve(const Matrix& s, const Matrix& b) {
  Eigen::LLT<Matrix> llt(0.5 * (s + s.transpose()));
  if (llt.info() != Eigen::Success) fail(ErrorKind::NotSPD, "innovation covariance is not positive definite");
  return llt.solve(b);
}

GaussianBelief linear_gain_update(const GaussianBelief& b, const Matrix& h, const Vector& innovation,
                                  const Matrix& r) {
  const Matrix s = h * b.cov * h.transpose() + r;
  // K = P H^T S^-1
  const Matrix k = spd_solve(s, h * b.cov).transpose();
  Vector mean = b.mean + k * innovation;
  const Eigen::Index n = b.dim();
  const Matrix ikh = Matrix::Identity(n, n) - k * h;
  Matrix cov = ikh * b.cov * ikh.transpose() + k * r * k.transpose();
  return finalize_belief(std::move(mean), std::move(cov));
}

}  // namespace

GaussianBelief finalize_belief(Vector mean, Matrix cov) {
  if (!mean.allFinite() || !cov.allFinite()) fail(ErrorKind::NonFinite, "filter produced non-finite values");
  Matrix sym = 0.5 * (cov + cov.transpose());
  return GaussianBelief(std::move(mean), std::move(sym));
}

UkfParams UkfParams::preset(int gamma) {
  if (gamma != 0 && gamma != 1) fail(ErrorKind::InvalidArgument, "gamma preset must be 0 or 1");
  return UkfParams{1.0, 2.0, 0.0};
}

SigmaSet ukf_sigma_points(const GaussianBelief& belief, const UkfParams& params) {
  const Eigen::Index l = belief.dim();
  const double lam = params.lambda(l);
  const double spread = static_cast<double>(l) + lam;
  if (!(spread > 0.0)) fail(ErrorKind::InvalidArgument, "L + lambda must be positive");
  const Matrix s = cholesky(spread * belief.cov);
  SigmaSet out;
  out.points.resize(l, 2 * l + 1);
  out.points.col(0) = belief.mean;
  for (Eigen::Index i = 0; i < l; ++i) {
    out.points.col(1 + i) = belief.mean + s.col(i);
    out.points.col(1 + l + i) = belief.mean - s.col(i);
  }
  out.w_mean = Vector::Constant(2 * l + 1, 1.0 / (2.0 * spread));
  out.w_cov = out.w_mean;
  out.w_mean(0) = lam / spread;
  out.w_cov(0) = lam / spread + 1.0 - params.alpha * params.alpha + params.beta;
  return out;
}

Matrix numeric_jacobian(const std::function<Vector(const Vector&, const Vector&)>& fn, const Vector& x,
                        const Vector& u) {
  const Vector f0 = fn(x, u);
  Matrix j(f0.size(), x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x(k)));
    xp(k) = x(k) + h;
    xm(k) = x(k) - h;
    j.col(k) = (fn(xp, u) - fn(xm, u)) / (2.0 * h);
    xp(k) = x(k);
    xm(k) = x(k);
  }
  return j;
}

GaussianBelief kf_predict(const LinearForm& lin, const GaussianBelief& b, const Vector& u, const Matrix& q) {
  Vector mean = lin.m * b.mean;
  if (lin.b.size() && u.size()) mean += lin.b * u;
  Matrix cov = lin.m * b.cov * lin.m.transpose() + q;
  return finalize_belief(std::move(mean), std::move(cov));
}

GaussianBelief kf_update(const LinearForm& lin, const GaussianBelief& b, const Vector& u, const Vector& y,
                         const Matrix& r, const std::vector<Eigen::Index>& angle_outputs) {
  Vector pred = lin.h * b.mean;
  if (lin.d.size() && u.size()) pred += lin.d * u;
  Vector innov = y - pred;
  wrap_entries(innov, angle_outputs);
  return linear_gain_update(b, lin.h, innov, r);
}

GaussianBelief ekf_predict(const Transition& f, const JacobianFn& jac, const GaussianBelief& b, const Vector& u,
                           const Matrix& q) {
  const Matrix m = jac ? jac(b.mean, u) : numeric_jacobian(f, b.mean, u);
  Vector mean = f(b.mean, u);
  Matrix cov = m * b.cov * m.transpose() + q;
  return finalize_belief(std::move(mean), std::move(cov));
}

GaussianBelief ekf_update(const Measurement& h, const JacobianFn& jac, const GaussianBelief& b, const Vector& u,
                          const Vector& y, const Matrix& r, const std::vector<Eigen::Index>& angle_outputs) {
  const Matrix hm = jac ? jac(b.mean, u) : numeric_jacobian(h, b.mean, u);
  Vector innov = y - h(b.mean, u);
  wrap_entries(innov, angle_outputs);
  return linear_gain_update(b, hm, innov, r);
}

GaussianBelief ukf_predict(const Transition& f, const GaussianBelief& b, const Vector& u, const Matrix& q,
                           const UkfParams& params) {
  const SigmaSet s = ukf_sigma_points(b, params);
  const Eigen::Index n = s.points.cols();
  Matrix xp(b.dim(), n);
  for (Eigen::Index j = 0; j < n; ++j) xp.col(j) = f(s.points.col(j), u);
  Vector mean = xp * s.w_mean;
  const Matrix d = xp.colwise() - mean;
  Matrix cov = d * s.w_cov.asDiagonal() * d.transpose() + q;
  return finalize_belief(std::move(mean), std::move(cov));
}

GaussianBelief ukf_update(const Measurement& h, const GaussianBelief& b, const Vector& u, const Vector& y,
                          const Matrix& r, const UkfParams& params,
                          const std::vector<Eigen::Index>& angle_outputs) {
  const SigmaSet s = ukf_sigma_points(b, params);
  const Eigen::Index n = s.points.cols();
  Matrix yp(y.size(), n);
  for (Eigen::Index j = 0; j < n; ++j) yp.col(j) = h(s.points.col(j), u);
  const Vector ymean = yp * s.w_mean;
  Matrix dy = yp.colwise() - ymean;
  for (auto i : angle_outputs)
    for (Eigen::Index j = 0; j < n; ++j) dy(i, j) = wrap_angle(dy(i, j));
  const Matrix dx = s.points.colwise() - b.mean;
  const Matrix pyy = dy * s.w_cov.asDiagonal() * dy.transpose() + r;
  const Matrix pxy = dx * s.w_cov.asDiagonal() * dy.transpose();
  const Matrix k = spd_solve(pyy, pxy.transpose()).transpose();
  Vector innov = y - ymean;
  wrap_entries(innov, angle_outputs);
  Vector mean = b.mean + k * innov;
  Matrix cov = b.cov - k * pyy * k.transpose();
  return finalize_belief(std::move(mean), std::move(cov));
}

GaussianBelief kf_step(const StateSpaceModel& model, const GaussianBelief& b, const Vector& u, const Vector& y) {
  if (!model.linear) fail(ErrorKind::InvalidArgument, "kf_step needs a linear model");
  GaussianBelief out = kf_predict(*model.linear, b, u, model.q);
  if (y.size()) out = kf_update(*model.linear, out, u, y, model.r, model.angle_outputs);
  wrap_states(out.mean, model.angle_states);
  return out;
}

GaussianBelief ekf_step(const StateSpaceModel& model, const GaussianBelief& b, const Vector& u, const Vector& y,
                        const std::optional<Jacobians>& jacobians) {
  const Transition f = [&model](const Vector& x, const Vector& uu) { return model.propagate(x, uu); };
  const Measurement h = [&model](const Vector& x, const Vector& uu) { return model.observe(x, uu); };
  JacobianFn jf = jacobians ? jacobians->transition : JacobianFn{};
  JacobianFn jh = jacobians ? jacobians->measurement : JacobianFn{};
  // A purely linear model carries its own exact Jacobians.
  if (model.linear && !model.transition && !model.derivative) {
    const LinearForm lin = *model.linear;
    if (!jf) jf = [lin](const Vector&, const Vector&) { return lin.m; };
    if (!jh && !model.measurement && lin.h.size()) jh = [lin](const Vector&, const Vector&) { return lin.h; };
  }
  GaussianBelief out = ekf_predict(f, jf, b, u, model.q);
  if (y.size()) out = ekf_update(h, jh, out, u, y, model.r, model.angle_outputs);
  wrap_states(out.mean, model.angle_states);
  return out;
}

GaussianBelief ukf_step(const StateSpaceModel& model, const GaussianBelief& b, const Vector& u, const Vector& y,
                        const UkfParams& params) {
  const Transition f = [&model](const Vector& x, const Vector& uu) { return model.propagate(x, uu); };
  const Measurement h = [&model](const Vector& x, const Vector& uu) { return model.observe(x, uu); };
  GaussianBelief out = ukf_predict(f, b, u, model.q, params);
  if (y.size()) out = ukf_update(h, out, u, y, model.r, params, model.angle_outputs);
  wrap_states(out.mean, model.angle_states);
  return out;
}

namespace {

struct Normal {
  Matrix h;
  Vector residual;
};

Normal linearize(const StateSpaceModel& model, const Vector& x, const Vector& u, const Vector& y,
                 const JacobianFn& jac) {
  const Measurement hfun = [&model](const Vector& xx, const Vector& uu) { return model.observe(xx, uu); };
  Normal out;
  if (jac)
    out.h = jac(x, u);
  else if (model.linear && model.linear->h.size() && !model.measurement)
    out.h = model.linear->h;
  else
    out.h = numeric_jacobian(hfun, x, u);
  out.residual = y - model.observe(x, u);
  wrap_entries(out.residual, model.angle_outputs);
  return out;
}

Vector gauss_newton_step(const Normal& nrm, const Matrix& w) {
  const Matrix a = nrm.h.transpose() * w * nrm.h;
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  if (qr.rank() < a.cols()) fail(ErrorKind::RankDeficient, "measurement Jacobian lacks full column rank");
  return qr.solve(nrm.h.transpose() * w * nrm.residual);
}

double weighted_cost(const Vector& r, const Matrix& w) { return r.dot(w * r); }

Matrix weights(const StateSpaceModel& model) {
  Eigen::LLT<Matrix> llt(model.r);
  if (llt.info() != Eigen::Success) fail(ErrorKind::NotSPD, "measurement noise is not positive definite");
  return llt.solve(Matrix::Identity(model.r.rows(), model.r.cols()));
}

}  // namespace

Vector wls_step(const StateSpaceModel& model, const Vector& x_pred, const Vector& u, const Vector& y,
                const JacobianFn& jac) {
  const Matrix w = weights(model);
  const Normal nrm = linearize(model, x_pred, u, y, jac);
  Vector x = x_pred + gauss_newton_step(nrm, w);
  wrap_states(x, model.angle_states);
  return x;
}

Vector wnls_step(const StateSpaceModel& model, const Vector& x_pred, const Vector& u, const Vector& y,
                 const WnlsOptions& opts, const JacobianFn& jac) {
  if (!(opts.damping > 0.0 && opts.damping < 1.0)) fail(ErrorKind::InvalidArgument, "damping must lie in (0, 1)");
  if (opts.iterations < 1) fail(ErrorKind::InvalidArgument, "iterations must be at least 1");
  const Matrix w = weights(model);
  Vector x = x_pred;
  for (int it = 0; it < opts.iterations; ++it) {
    const Normal nrm = linearize(model, x, u, y, jac);
    const double cost = weighted_cost(nrm.residual, w);
    const Vector dx = gauss_newton_step(nrm, w);
    if (dx.norm() <= 1e-12 * (1.0 + x.norm())) break;
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      Vector cand = x + step * dx;
      Vector r = y - model.observe(cand, u);
      wrap_entries(r, model.angle_outputs);
      if (weighted_cost(r, w) <= cost) {
        x = std::move(cand);
        accepted = true;
        break;
      }
      step *= opts.damping;
    }
    if (!accepted) {
      if (it == 0) fail(ErrorKind::NonConvergence, "residual increases even at full damping");
      break;
    }
  }
  wrap_states(x, model.angle_states);
  return x;
}

}  // namespace coinfer
