#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace coinfer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Lower-triangular L with L*L^T = a. Symmetrizes first and retries once with
// a 1e-12*trace/n diagonal jitter before reporting NotSPD.
Matrix cholesky(const Matrix& a);

struct SymEig {
  Vector values;   // ascending
  Matrix vectors;  // columns are orthonormal eigenvectors
};

// Cyclic Jacobi rotations; off-diagonal tolerance 1e-12 relative, 100 sweeps max.
SymEig sym_eig(const Matrix& a);

// exp(-beta * l) for symmetric PSD l via spectral decomposition.
Matrix matrix_exp_neg(const Matrix& l, double beta);

bool all_finite(const Matrix& m);
bool is_symmetric(const Matrix& m, double tol);

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

// 64-bit Mersenne Twister with std distributions. Streams for parallel
// branches are forked by mixing the parent seed with a stream id.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 42) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  Vector normal_vector(Eigen::Index n);

  Rng fork(std::uint64_t stream) const;

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Draw from N(mean, cov). Zero covariance returns the mean exactly.
Vector mvn_sample(const Vector& mean, const Matrix& cov, Rng& rng);

}  // namespace coinfer
