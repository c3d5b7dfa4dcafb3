#include "coinfer/sindy.hpp"

#include <cmath>

#include "coinfer/error.hpp"

namespace coinfer {

Vector trapezoid_integral(const Vector& a, double dt) {
  Vector out = Vector::Zero(a.size());
  for (Eigen::Index n = 1; n < a.size(); ++n) out(n) = out(n - 1) + 0.5 * dt * (a(n) + a(n - 1));
  return out;
}

Vector highpass(const Vector& x, double dt, double cutoff_hz) {
  if (cutoff_hz <= 0.0) return x;
  const double w = 2.0 * M_PI * cutoff_hz;
  const double kb = 2.0 / dt;
  Vector y = Vector::Zero(x.size());
  for (Eigen::Index n = 1; n < x.size(); ++n) y(n) = (kb * (x(n) - x(n - 1)) + (kb - w) * y(n - 1)) / (kb + w);
  return y;
}

Kinematics reconstruct_kinematics(const Vector& accel, double dt, double cutoff_hz) {
  if (accel.size() < 3) fail(ErrorKind::TooFewSamples, "reconstruct_kinematics needs >= 3 samples");
  if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "reconstruct_kinematics needs dt > 0");
  if (!accel.allFinite()) fail(ErrorKind::NonFinite, "reconstruct_kinematics: non-finite acceleration");
  Kinematics k;
  k.velocity = highpass(trapezoid_integral(accel, dt), dt, cutoff_hz);
  k.displacement = highpass(trapezoid_integral(k.velocity, dt), dt, cutoff_hz);
  return k;
}

LibraryMatrix build_library(const Vector& dx, const Vector& dv) {
  if (dx.size() != dv.size()) fail(ErrorKind::LengthMismatch, "build_library: dx and dv lengths differ");
  LibraryMatrix th(dx.size(), 6);
  th.col(0) = dx;
  th.col(1) = dv;
  th.col(2) = dx.array().cube().matrix();
  th.col(3) = (dv.array().abs() * dv.array()).matrix();
  th.col(4) = (dx.array() * dv.array()).matrix();
  th.col(5).setOnes();
  if (!th.allFinite()) fail(ErrorKind::NonFinite, "build_library: non-finite entries");
  return th;
}

Vector stlsq(const LibraryMatrix& theta, const Vector& target, const SindyConfig& config) {
  if (!(config.threshold > 0.0) || config.max_iters < 1) fail(ErrorKind::InvalidParams, "stlsq config");
  if (theta.rows() != target.size()) fail(ErrorKind::LengthMismatch, "stlsq: rows != target length");
  const auto p = theta.cols();
  Vector norms = Vector::Ones(p);
  if (config.normalize_columns) norms = theta.colwise().norm().transpose();
  std::vector<bool> active(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) active[j] = theta.col(j).squaredNorm() > 0.0;
  Vector xi = Vector::Zero(p);
  for (int it = 0; it < config.max_iters; ++it) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < p; ++j)
      if (active[j]) cols.push_back(j);
    xi.setZero();
    if (cols.empty()) break;
    const auto na = static_cast<Eigen::Index>(cols.size());
    if (theta.rows() < na) fail(ErrorKind::RankDeficient, "stlsq: fewer rows than active columns");
    Matrix a(theta.rows(), na);
    for (Eigen::Index c = 0; c < na; ++c) a.col(c) = theta.col(cols[c]) / norms(cols[c]);
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    if (qr.rank() < na) fail(ErrorKind::RankDeficient, "stlsq: active library is rank deficient");
    const Vector sol = qr.solve(target);
    for (Eigen::Index c = 0; c < na; ++c) xi(cols[c]) = sol(c) / norms(cols[c]);
    bool changed = false;
    for (Eigen::Index j = 0; j < p; ++j) {
      const bool keep = active[j] && std::abs(xi(j)) >= config.threshold;
      if (keep != active[j]) changed = true;
      active[j] = keep;
    }
    if (!changed) break;
  }
  for (Eigen::Index j = 0; j < p; ++j)
    if (!active[j]) xi(j) = 0.0;
  return xi;
}

LearnedLaw fit_interface_law(const Vector& accel_sender, const Vector& accel_receiver, const Vector& force,
                             const SindyConfig& config) {
  if (accel_sender.size() != accel_receiver.size() || force.size() != accel_sender.size())
    fail(ErrorKind::LengthMismatch, "fit_interface_law: series are not aligned");
  const Kinematics s = reconstruct_kinematics(accel_sender, config.dt, config.highpass_cutoff);
  const Kinematics r = reconstruct_kinematics(accel_receiver, config.dt, config.highpass_cutoff);
  const Vector dx = s.displacement - r.displacement;
  Vector dv = s.velocity - r.velocity;
  Vector y = force;
  if (config.consistent_filtering) {
    dv = highpass(dv, config.dt, config.highpass_cutoff);
    y = highpass(highpass(force, config.dt, config.highpass_cutoff), config.dt, config.highpass_cutoff);
  }
  const Vector xi = stlsq(build_library(dx, dv), y, config);
  LearnedLaw law;
  for (int j = 0; j < 6; ++j) law.xi[j] = xi(j);
  return law;
}

}  // namespace coinfer
