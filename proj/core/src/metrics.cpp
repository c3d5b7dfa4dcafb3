#include "coinfer/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "coinfer/error.hpp"

namespace coinfer {

double rmse(const Vector& est, const Vector& truth) {
  if (est.size() != truth.size()) fail(ErrorKind::LengthMismatch, "rmse: length mismatch");
  if (est.size() == 0) fail(ErrorKind::TooFewSamples, "rmse of empty series");
  return std::sqrt((est - truth).squaredNorm() / static_cast<double>(est.size()));
}

double rmse(const Matrix& est, const Matrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) fail(ErrorKind::LengthMismatch, "rmse: shape mismatch");
  if (est.size() == 0) fail(ErrorKind::TooFewSamples, "rmse of empty series");
  return std::sqrt((est - truth).squaredNorm() / static_cast<double>(est.size()));
}

NrmseResult nrmse(const Vector& est, const Vector& truth) {
  const double r = rmse(est, truth);
  const double range = truth.maxCoeff() - truth.minCoeff();
  if (range > 0.0) return {r / range, false};
  const double mag = std::abs(truth(0));
  return {mag > 0.0 ? r / mag : r, true};
}

double gaussian_z(double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "coverage level must lie in (0, 1)");
  const boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, 0.5 + 0.5 * level);
}

double coverage(const Matrix& truth, const Matrix& mean, const Matrix& var, double level) {
  if (truth.rows() != mean.rows() || truth.cols() != mean.cols() || var.rows() != mean.rows() ||
      var.cols() != mean.cols())
    fail(ErrorKind::LengthMismatch, "coverage: shape mismatch");
  if (truth.size() == 0) fail(ErrorKind::TooFewSamples, "coverage of empty series");
  const double z = gaussian_z(level);
  std::size_t inside = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      const double sd = std::sqrt(std::max(0.0, var(i, j)));
      if (std::abs(truth(i, j) - mean(i, j)) <= z * sd) ++inside;
    }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

double coverage(const Vector& truth, const Vector& mean, const Vector& var, double level) {
  return coverage(Matrix(truth), Matrix(mean), Matrix(var), level);
}

double nll(const Matrix& truth, const Matrix& mean, const Matrix& var) {
  if (truth.rows() != mean.rows() || truth.cols() != mean.cols() || var.rows() != mean.rows() ||
      var.cols() != mean.cols())
    fail(ErrorKind::LengthMismatch, "nll: shape mismatch");
  if (truth.rows() == 0) fail(ErrorKind::TooFewSamples, "nll of empty series");
  if ((var.array() <= 0.0).any()) fail(ErrorKind::NonPositiveVariance, "nll needs positive variances");
  const double log2pi = std::log(2.0 * M_PI);
  const auto r2 = (truth - mean).array().square();
  const double total = 0.5 * ((var.array().log() + log2pi) + r2 / var.array()).sum();
  return total / static_cast<double>(truth.rows());
}

Matrix angle_error(const Matrix& est, const Matrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) fail(ErrorKind::LengthMismatch, "angle_error shape");
  return (est - truth).unaryExpr([](double d) { return wrap_angle(d); });
}

double median(std::vector<double> v) {
  if (v.empty()) fail(ErrorKind::TooFewSamples, "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept) {
  if (x.size() != y.size()) fail(ErrorKind::LengthMismatch, "loglog_slope lengths");
  if (x.size() < 2) fail(ErrorKind::TooFewSamples, "loglog_slope needs >= 2 points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Matrix a(n, 2);
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) fail(ErrorKind::InvalidArgument, "loglog_slope needs positive values");
    a(i, 0) = std::log(x[i]);
    a(i, 1) = 1.0;
    b(i) = std::log(y[i]);
  }
  const Vector sol = a.colPivHouseholderQr().solve(b);
  if (intercept) *intercept = sol(1);
  return sol(0);
}

ScalingResult scaling_study(const std::vector<double>& sizes, const std::function<double(double)>& runner,
                            int repeats) {
  if (repeats < 1) fail(ErrorKind::InvalidArgument, "scaling_study needs repeats >= 1");
  ScalingResult res;
  std::vector<double> xs, ys;
  for (double s : sizes) {
    ScalingPoint p;
    p.size = s;
    for (int r = 0; r < repeats; ++r) p.samples.push_back(runner(s));
    p.seconds = median(p.samples);
    xs.push_back(s);
    ys.push_back(p.seconds);
    res.points.push_back(std::move(p));
  }
  res.slope = loglog_slope(xs, ys, &res.intercept);
  return res;
}

}  // namespace coinfer
