#pragma once

#include <string>
#include <vector>

#include "coinfer_cli/scenarios.hpp"

namespace coinfer::cli::detail {

inline double num(const json& p, const char* key) { return p.at(key).get<double>(); }
inline int integer(const json& p, const char* key) { return p.at(key).get<int>(); }
inline std::string str(const json& p, const char* key) { return p.at(key).get<std::string>(); }

IntegratorKind integrator_from_string(const std::string& s);
InjectionRule injection_from_string(const std::string& s);
UkfParams ukf_from_json(const json& j);

// Per-channel truth/mean/std columns.
Trajectory belief_trajectory(const std::string& name, const std::vector<double>& t,
                             const std::vector<std::string>& channels, const Matrix& truth, const Matrix& mean,
                             const Matrix& var);

struct ChannelMetrics {
  double rmse = 0.0;
  double cov95 = 0.0;
  double cov68 = 0.0;
  double nll = 0.0;
};

// Rows from `first` on, columns `channels`.
ChannelMetrics channel_metrics(const Matrix& truth, const Matrix& mean, const Matrix& var,
                               const std::vector<Eigen::Index>& channels, Eigen::Index first);

Matrix take_cols(const Matrix& m, const std::vector<Eigen::Index>& cols, Eigen::Index first_row = 0);

json summarize(const json& replicates, const std::vector<std::string>& methods,
               const std::vector<std::string>& keys);

}  // namespace coinfer::cli::detail
