#pragma once

#include <utility>
#include <vector>

#include "coinfer/numerics.hpp"

namespace coinfer {

class DiffusionGraph {
 public:
  // w must be square, symmetric, non-negative; the diagonal is ignored.
  explicit DiffusionGraph(const Matrix& w);
  static DiffusionGraph from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                   const std::vector<double>& weights);

  std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
  const Matrix& weights() const { return w_; }
  const Matrix& laplacian() const { return l_; }

 private:
  Matrix w_;
  Matrix l_;
};

struct DefectSignal {
  std::size_t source = 0;
  Vector magnitude;  // |delta f|, non-negative
};

Vector defect_force_stiffness(double k_star, const Vector& x3, const Vector& x4);
Vector defect_force_mass(double m_star, const Vector& a3_base);
DefectSignal make_defect(std::size_t source, const Vector& signed_defect);

double rms(const Vector& s);

struct EdgeAffinities {
  std::vector<double> rms;  // per edge
  std::vector<double> eta;  // normalised over the listed edges
  bool uniform_fallback = false;
};

// Normalises over the given edges (the source node's incident set).
EdgeAffinities edge_weights_from_rms(const std::vector<Vector>& interface_forces);

struct OneHopScores {
  double source = 0.0;
  std::vector<double> neighbors;
};

OneHopScores one_hop_scores(double q, double alpha, const std::vector<double>& eta);

// exp(-beta L) q_def
Vector heat_kernel_scores(const DiffusionGraph& g, double beta, const Vector& q_def);
// One column of scores per time sample: s(t) = H q_def(t), q_def(t) = magnitude(t) e_source.
Matrix heat_kernel_scores_series(const DiffusionGraph& g, double beta, const DefectSignal& d);

struct Envelope {
  Vector lower;
  Vector upper;
};

Envelope sensitivity_envelope(const Vector& baseline, const Vector& score, const Vector& sigma);
Envelope sensitivity_envelope(const Vector& baseline, double score, const Vector& sigma);

}  // namespace coinfer
