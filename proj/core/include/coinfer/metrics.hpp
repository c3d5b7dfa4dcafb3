#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "coinfer/numerics.hpp"

namespace coinfer {

double rmse(const Vector& est, const Vector& truth);
// Column-stacked channels: RMSE over every entry.
double rmse(const Matrix& est, const Matrix& truth);

struct NrmseResult {
  double value = 0.0;
  bool fallback = false;  // truth had zero range; normalised by |truth|
};

NrmseResult nrmse(const Vector& est, const Vector& truth);

// Two-sided Gaussian quantile for a central interval, e.g. 0.95 -> 1.95996.
double gaussian_z(double level);

// Fraction of (row, channel) pairs inside mean +- z sd.
double coverage(const Matrix& truth, const Matrix& mean, const Matrix& var, double level);
double coverage(const Vector& truth, const Vector& mean, const Vector& var, double level);

// Mean over rows of the per-row sum over channels of the Gaussian NLL.
double nll(const Matrix& truth, const Matrix& mean, const Matrix& var);

// Wrapped difference for angle channels.
Matrix angle_error(const Matrix& est, const Matrix& truth);

struct MetricReport {
  std::map<std::string, double> rmse;
  std::map<std::string, double> nrmse;
  std::map<std::string, bool> nrmse_fallback;
  std::map<std::string, double> coverage;  // key like "0.95"
  double nll = 0.0;
  bool has_nll = false;
  double seconds = 0.0;
};

struct ScalingPoint {
  double size = 0.0;
  double seconds = 0.0;  // median of repeats
  std::vector<double> samples;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
};

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept = nullptr);

// runner(size) returns the wall-clock seconds of one run.
ScalingResult scaling_study(const std::vector<double>& sizes, const std::function<double(double)>& runner,
                            int repeats = 3);

double median(std::vector<double> v);

}  // namespace coinfer
