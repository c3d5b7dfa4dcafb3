#include "scenario_util.hpp"

#include <cmath>

namespace coinfer::cli::detail {

IntegratorKind integrator_from_string(const std::string& s) {
  if (s == "euler") return IntegratorKind::Euler;
  if (s == "heun") return IntegratorKind::Heun;
  if (s == "ab2") return IntegratorKind::AB2;
  fail(ErrorKind::ConfigInvalid, "unknown integrator '" + s + "'");
}

InjectionRule injection_from_string(const std::string& s) {
  if (s == "incremental") return InjectionRule::Incremental;
  if (s == "full") return InjectionRule::Full;
  fail(ErrorKind::ConfigInvalid, "unknown injection rule '" + s + "'");
}

UkfParams ukf_from_json(const json& j) {
  UkfParams u;
  u.alpha = num(j, "alpha");
  u.beta = num(j, "beta");
  u.kappa = num(j, "kappa");
  return u;
}

Trajectory belief_trajectory(const std::string& name, const std::vector<double>& t,
                             const std::vector<std::string>& channels, const Matrix& truth, const Matrix& mean,
                             const Matrix& var) {
  std::vector<std::pair<std::string, Vector>> cols;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto j = static_cast<Eigen::Index>(c);
    cols.emplace_back(channels[c] + "_true", truth.col(j));
    cols.emplace_back(channels[c] + "_mean", mean.col(j));
    cols.emplace_back(channels[c] + "_std", var.col(j).cwiseMax(0.0).cwiseSqrt());
  }
  return make_trajectory(name, t, cols);
}

Matrix take_cols(const Matrix& m, const std::vector<Eigen::Index>& cols, Eigen::Index first_row) {
  Matrix out(m.rows() - first_row, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    out.col(static_cast<Eigen::Index>(c)) = m.col(cols[c]).tail(m.rows() - first_row);
  return out;
}

ChannelMetrics channel_metrics(const Matrix& truth, const Matrix& mean, const Matrix& var,
                               const std::vector<Eigen::Index>& channels, Eigen::Index first) {
  const Matrix t = take_cols(truth, channels, first);
  const Matrix m = take_cols(mean, channels, first);
  const Matrix v = take_cols(var, channels, first);
  ChannelMetrics out;
  out.rmse = rmse(m, t);
  out.cov95 = coverage(t, m, v, 0.95);
  out.cov68 = coverage(t, m, v, 0.68);
  out.nll = nll(t, m, v);
  return out;
}

json summarize(const json& replicates, const std::vector<std::string>& methods,
               const std::vector<std::string>& keys) {
  json s = json::object();
  for (const auto& meth : methods) {
    for (const auto& k : keys) {
      std::vector<double> vals;
      for (const auto& r : replicates)
        if (r.at("methods").contains(meth)) vals.push_back(r["methods"][meth].at(k).get<double>());
      if (vals.empty()) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      const double sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
      s[meth][k] = {{"mean", mean}, {"std", sd}, {"n", vals.size()}};
    }
  }
  return s;
}

}  // namespace coinfer::cli::detail
