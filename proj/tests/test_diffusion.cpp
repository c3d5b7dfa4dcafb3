#include <doctest.h>

#include "helpers.hpp"

using namespace coinfer;

namespace {
Matrix path3_laplacian() {
  Matrix l(3, 3);
  l << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  return l;
}
Matrix taylor_exp_neg(const Matrix& l, double beta, int terms) {
  Matrix sum = Matrix::Identity(l.rows(), l.cols()), term = sum;
  for (int k = 1; k <= terms; ++k) {
    term = term * (-beta * l) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}
}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("Laplacian of a weighted graph") {
    const auto g = DiffusionGraph::from_edges(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
    CHECK(th::max_abs(g.laplacian() - path3_laplacian()) < 1e-15);
    CHECK(th::max_abs(g.laplacian() * Vector::Ones(3)) < 1e-12);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 1) = 1.0;
    CHECK_THROWS_AS(DiffusionGraph{bad}, Error);
    bad(1, 0) = -1.0;
    bad(0, 1) = -1.0;
    CHECK_THROWS_AS(DiffusionGraph{bad}, Error);
  }

  TEST_CASE("one-hop split by hand") {
    const auto s = one_hop_scores(1.0, 0.6, {0.7, 0.3});
    CHECK(s.source == doctest::Approx(0.625));
    CHECK(s.neighbors[0] == doctest::Approx(0.2625));
    CHECK(s.neighbors[1] == doctest::Approx(0.1125));
    const auto none = one_hop_scores(2.0, 0.0, {0.5, 0.5});
    CHECK(none.source == 2.0);
    CHECK(none.neighbors[0] == 0.0);
  }

  TEST_CASE("one-hop conserves mass") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + trial % 6;
      std::vector<double> eta(n);
      double sum = 0.0;
      for (auto& e : eta) sum += (e = rng.uniform(0.0, 1.0));
      for (auto& e : eta) e /= sum;
      const double q = rng.uniform(0.0, 100.0);
      const auto s = one_hop_scores(q, rng.uniform(0.0, 3.0), eta);
      double total = s.source;
      for (double x : s.neighbors) total += x;
      CHECK(std::abs(total - q) < 1e-12 * std::max(1.0, q));
    }
  }

  TEST_CASE("heat kernel basics") {
    const auto g = DiffusionGraph::from_edges(3, {{0, 1}, {1, 2}}, {1.0, 1.0});
    Vector q(3);
    q << 0.0, 1.0, 0.0;
    CHECK(th::max_abs(heat_kernel_scores(g, 0.0, q) - q) < 1e-14);
    const Vector s = heat_kernel_scores(g, 0.9, q);
    CHECK(std::abs(s.sum() - 1.0) < 1e-10);
    const Vector oracle = taylor_exp_neg(path3_laplacian(), 0.9, 30) * q;
    CHECK(th::max_abs(s - oracle) < 1e-9);
    CHECK(s(0) == doctest::Approx(s(2)));
  }

  TEST_CASE("heat kernel source score never grows with beta") {
    const auto g = DiffusionGraph::from_edges(3, {{0, 1}, {1, 2}}, {0.7, 0.3});
    Vector q(3);
    q << 0.0, 1.0, 0.0;
    double prev = 1.0;
    for (double beta = 0.0; beta <= 5.0; beta += 0.1) {
      const double src = heat_kernel_scores(g, beta, q)(1);
      CHECK(src <= prev + 1e-14);
      prev = src;
    }
  }

  TEST_CASE("heat kernel conserves mass on random graphs") {
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index n = 2 + trial % 8;
      Matrix w = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) w(i, j) = w(j, i) = rng.uniform(0.0, 1.0) < 0.5 ? rng.uniform(0, 2) : 0;
      const DiffusionGraph g(w);
      const Vector q = rng.normal_vector(n).cwiseAbs();
      CHECK(std::abs(heat_kernel_scores(g, rng.uniform(0.0, 4.0), q).sum() - q.sum()) < 1e-10);
    }
  }

  TEST_CASE("defect forces by hand") {
    Vector x3(2), x4(2);
    x3 << 1e-3, 0.5;
    x4 << 0.0, 0.5;
    const Vector d = defect_force_stiffness(1e4, x3, x4);
    CHECK(d(0) == doctest::Approx(-10.0));
    CHECK(d(1) == 0.0);
    Vector a(2);
    a << 0.2, -0.2;
    const Vector m = defect_force_mass(100.0, a);
    CHECK(m(0) == doctest::Approx(-20.0));
    CHECK(m(1) == doctest::Approx(20.0));
    CHECK(defect_force_mass(100.0, Vector::Zero(3)).isZero());
    const DefectSignal sig = make_defect(1, m);
    CHECK(sig.magnitude.minCoeff() >= 0.0);
    CHECK(sig.magnitude(1) == doctest::Approx(20.0));
  }

  TEST_CASE("RMS edge weights") {
    Vector s(2);
    s << 3.0, 4.0;
    CHECK(rms(s) == doctest::Approx(std::sqrt(12.5)));
    const auto eq = edge_weights_from_rms({s, -s});
    CHECK(eq.eta[0] == doctest::Approx(0.5));
    CHECK(eq.eta[1] == doctest::Approx(0.5));
    const auto one = edge_weights_from_rms({s});
    CHECK(one.eta[0] == doctest::Approx(1.0));
    const auto zero = edge_weights_from_rms({Vector::Zero(4), Vector::Zero(4), Vector::Zero(4)});
    CHECK(zero.uniform_fallback);
    CHECK(zero.eta[2] == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("sensitivity envelopes") {
    const Vector base = Vector::LinSpaced(5, -1.0, 1.0);
    const Vector sigma = Vector::Constant(5, 0.01);
    const auto flat = sensitivity_envelope(base, 0.0, sigma);
    CHECK(flat.lower == base);
    CHECK(flat.upper == base);
    const auto band = sensitivity_envelope(Vector::Zero(5), 2.0, sigma);
    CHECK(band.upper(3) == doctest::Approx(0.02));
    CHECK(band.lower(3) == doctest::Approx(-0.02));
    const auto series = sensitivity_envelope(base, Vector::LinSpaced(5, 0.0, 4.0), sigma);
    CHECK(th::max_abs((series.upper + series.lower) / 2 - base) < 1e-15);
  }
}
