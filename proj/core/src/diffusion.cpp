#include "coinfer/diffusion.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "coinfer/error.hpp"

namespace coinfer {

DiffusionGraph::DiffusionGraph(const Matrix& w) : w_(w) {
  if (w.rows() != w.cols()) fail(ErrorKind::InvalidArgument, "adjacency must be square");
  if (!is_symmetric(w, 1e-12)) fail(ErrorKind::InvalidArgument, "adjacency must be symmetric");
  if ((w.array() < 0.0).any()) fail(ErrorKind::InvalidArgument, "adjacency weights must be >= 0");
  w_.diagonal().setZero();
  l_ = -w_;
  l_.diagonal() = w_.rowwise().sum();
}

DiffusionGraph DiffusionGraph::from_edges(std::size_t n,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                          const std::vector<double>& weights) {
  if (edges.size() != weights.size()) fail(ErrorKind::LengthMismatch, "one weight per edge");
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [a, b] = edges[e];
    if (a >= n || b >= n) fail(ErrorKind::IndexOutOfRange, "diffusion edge endpoint");
    w(a, b) += weights[e];
    w(b, a) = w(a, b);
  }
  return DiffusionGraph(w);
}

Vector defect_force_stiffness(double k_star, const Vector& x3, const Vector& x4) {
  if (x3.size() != x4.size()) fail(ErrorKind::LengthMismatch, "defect_force_stiffness: series lengths differ");
  return -k_star * (x3 - x4);
}

Vector defect_force_mass(double m_star, const Vector& a3_base) {
  if (!a3_base.allFinite()) fail(ErrorKind::NonFinite, "defect_force_mass: non-finite acceleration");
  return -m_star * a3_base;
}

DefectSignal make_defect(std::size_t source, const Vector& signed_defect) {
  return {source, signed_defect.cwiseAbs()};
}

double rms(const Vector& s) {
  if (s.size() == 0) fail(ErrorKind::TooFewSamples, "rms of an empty series");
  return std::sqrt(s.squaredNorm() / static_cast<double>(s.size()));
}

EdgeAffinities edge_weights_from_rms(const std::vector<Vector>& interface_forces) {
  if (interface_forces.empty()) fail(ErrorKind::TooFewSamples, "edge_weights_from_rms: no edges");
  EdgeAffinities out;
  double total = 0.0;
  for (const auto& f : interface_forces) {
    out.rms.push_back(rms(f));
    total += out.rms.back();
  }
  if (!(total > 0.0)) {
    spdlog::warn("all interface forces are zero; using uniform affinities");
    out.uniform_fallback = true;
    out.eta.assign(interface_forces.size(), 1.0 / static_cast<double>(interface_forces.size()));
    return out;
  }
  for (double r : out.rms) out.eta.push_back(r / total);
  return out;
}

OneHopScores one_hop_scores(double q, double alpha, const std::vector<double>& eta) {
  if (alpha < 0.0) fail(ErrorKind::InvalidArgument, "one_hop_scores: alpha < 0");
  OneHopScores s;
  s.source = q / (1.0 + alpha);
  const double leak = alpha * q / (1.0 + alpha);
  for (double e : eta) {
    if (e < 0.0) fail(ErrorKind::InvalidArgument, "one_hop_scores: negative affinity");
    s.neighbors.push_back(e * leak);
  }
  return s;
}

Vector heat_kernel_scores(const DiffusionGraph& g, double beta, const Vector& q_def) {
  if (beta < 0.0) fail(ErrorKind::InvalidArgument, "heat kernel needs beta >= 0");
  if (q_def.size() != static_cast<Eigen::Index>(g.size())) fail(ErrorKind::LengthMismatch, "q_def length");
  return matrix_exp_neg(g.laplacian(), beta) * q_def;
}

Matrix heat_kernel_scores_series(const DiffusionGraph& g, double beta, const DefectSignal& d) {
  if (beta < 0.0) fail(ErrorKind::InvalidArgument, "heat kernel needs beta >= 0");
  if (d.source >= g.size()) fail(ErrorKind::IndexOutOfRange, "defect source node");
  // Linear in q, so one kernel column serves the whole series.
  const Vector col = matrix_exp_neg(g.laplacian(), beta).col(static_cast<Eigen::Index>(d.source));
  return col * d.magnitude.transpose();
}

Envelope sensitivity_envelope(const Vector& baseline, const Vector& score, const Vector& sigma) {
  if (baseline.size() != score.size() || baseline.size() != sigma.size())
    fail(ErrorKind::LengthMismatch, "sensitivity_envelope: series lengths differ");
  if ((sigma.array() < 0.0).any()) fail(ErrorKind::InvalidArgument, "sensitivity_envelope: sigma < 0");
  const Vector half = (score.array() * sigma.array()).matrix();
  return {baseline - half, baseline + half};
}

Envelope sensitivity_envelope(const Vector& baseline, double score, const Vector& sigma) {
  return sensitivity_envelope(baseline, Vector::Constant(baseline.size(), score), sigma);
}

}  // namespace coinfer
