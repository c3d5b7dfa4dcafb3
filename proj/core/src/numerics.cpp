#include "coinfer/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "coinfer/error.hpp"

namespace coinfer {

namespace {

bool try_llt(const Matrix& a, Matrix& out) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    if (!(out(i, i) > 0.0) || !std::isfinite(out(i, i))) return false;
  return true;
}

}  // namespace

Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) fail(ErrorKind::InvalidArgument, "cholesky needs a square matrix");
  if (a.size() == 0) return Matrix(0, 0);
  if (!all_finite(a)) fail(ErrorKind::NonFinite, "cholesky input has non-finite entries");
  Matrix s = 0.5 * (a + a.transpose());
  Matrix l;
  if (try_llt(s, l)) return l;
  const double n = static_cast<double>(s.rows());
  const double jitter = std::max(1e-12 * std::abs(s.trace()) / n, 1e-300);
  s.diagonal().array() += jitter;
  if (try_llt(s, l)) return l;
  fail(ErrorKind::NotSPD, "matrix is not positive definite after jitter repair");
}

SymEig sym_eig(const Matrix& a_in) {
  const Eigen::Index n = a_in.rows();
  if (n != a_in.cols()) fail(ErrorKind::InvalidArgument, "sym_eig needs a square matrix");
  Matrix a = 0.5 * (a_in + a_in.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = off_norm() <= 1e-12 * scale;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_norm() <= 1e-12 * scale;
  }
  if (!converged) fail(ErrorKind::NonConvergence, "Jacobi eigensolver hit the sweep cap");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  SymEig out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

Matrix matrix_exp_neg(const Matrix& l, double beta) {
  if (beta < 0.0) fail(ErrorKind::InvalidArgument, "beta must be nonnegative");
  if (l.size() == 0) return Matrix(0, 0);
  const SymEig e = sym_eig(l);
  const Vector d = (-beta * e.values.array()).exp().matrix();
  Matrix h = e.vectors * d.asDiagonal() * e.vectors.transpose();
  return 0.5 * (h + h.transpose());
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  double r = std::fmod(a + pi, 2.0 * pi);
  if (r < 0) r += 2.0 * pi;
  r -= pi;
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vector Rng::normal_vector(Eigen::Index n) {
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = normal();
  return out;
}

Rng Rng::fork(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream + 1))); }

Vector mvn_sample(const Vector& mean, const Matrix& cov, Rng& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    fail(ErrorKind::LengthMismatch, "mvn_sample covariance does not match mean");
  if (cov.cwiseAbs().maxCoeff() == 0.0) return mean;
  // LDLT tolerates PSD (singular) covariances.
  Eigen::LDLT<Matrix> ldlt(0.5 * (cov + cov.transpose()));
  if (ldlt.info() != Eigen::Success) fail(ErrorKind::NotSPD, "mvn_sample covariance factorization failed");
  const Vector d = ldlt.vectorD();
  if ((d.array() < -1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff())).any())
    fail(ErrorKind::NotSPD, "mvn_sample covariance is indefinite");
  const Vector z = rng.normal_vector(mean.size());
  Vector w = d.cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
  // A = P^T L D L^T P, so P^T L sqrt(D) z has covariance A.
  Vector y = ldlt.matrixL() * w;
  Vector x = ldlt.transpositionsP().transpose() * y;
  return mean + x;
}

}  // namespace coinfer
