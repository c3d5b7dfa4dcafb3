#include <doctest.h>

#include "helpers.hpp"

using namespace coinfer;

TEST_SUITE("numerics") {
  TEST_CASE("cholesky of small hand cases") {
    CHECK(th::max_abs(cholesky(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)) < 1e-15);
    Matrix a(2, 2);
    a << 4, 2, 2, 3;
    Matrix l = cholesky(a);
    Matrix expect(2, 2);
    expect << 2, 0, 1, std::sqrt(2.0);
    CHECK(th::max_abs(l - expect) < 1e-14);
    CHECK(th::max_abs(l * l.transpose() - a) < 1e-14);
    CHECK(cholesky(Matrix::Constant(1, 1, 9.0))(0, 0) == doctest::Approx(3.0));
  }

  TEST_CASE("cholesky round trip on random factors") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index n = 1 + trial % 6;
      Matrix l = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) l(i, j) = rng.normal();
        l(i, i) = 0.5 + rng.uniform(0.0, 1.0);
      }
      CHECK(th::max_abs(cholesky(l * l.transpose()) - l) < 1e-9);
    }
  }

  TEST_CASE("cholesky rejects indefinite input") {
    Matrix a(2, 2);
    a << 1, 2, 2, 1;
    CHECK_THROWS_AS(cholesky(a), Error);
    try {
      cholesky(a);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NotSPD);
    }
  }

  TEST_CASE("cholesky repairs tiny asymmetry and semidefiniteness once") {
    Matrix a = Matrix::Identity(3, 3);
    a(0, 1) = 1e-14;
    CHECK_NOTHROW(cholesky(a));
    Matrix psd(2, 2);
    psd << 1, 1, 1, 1;
    CHECK_NOTHROW(cholesky(psd));
  }

  TEST_CASE("sym_eig hand cases") {
    Matrix d = Vector(Vector::LinSpaced(2, 1, 2)).asDiagonal();
    auto e = sym_eig(d);
    CHECK(e.values(0) == doctest::Approx(1.0));
    CHECK(e.values(1) == doctest::Approx(2.0));
    Matrix l(2, 2);
    l << 1, -1, -1, 1;
    e = sym_eig(l);
    CHECK(std::abs(e.values(0)) < 1e-14);
    CHECK(e.values(1) == doctest::Approx(2.0));
    e = sym_eig(Matrix::Identity(4, 4));
    CHECK(th::max_abs(e.values - Vector::Ones(4)) < 1e-15);
  }

  TEST_CASE("sym_eig trace, determinant and orthonormality") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index n = 2 + trial % 5;
      Matrix a(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
      const auto e = sym_eig(a);
      CHECK(std::abs(e.values.sum() - a.trace()) < 1e-9);
      CHECK(std::abs(e.values.prod() - a.determinant()) < 1e-9 * std::max(1.0, std::abs(a.determinant())));
      CHECK(th::max_abs(e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)) < 1e-10);
      CHECK(th::max_abs(e.vectors * e.values.asDiagonal() * e.vectors.transpose() - a) < 1e-9);
      for (Eigen::Index i = 1; i < n; ++i) CHECK(e.values(i - 1) <= e.values(i));
    }
  }

  TEST_CASE("matrix_exp_neg limits") {
    Matrix l(2, 2);
    l << 1, -1, -1, 1;
    CHECK(th::max_abs(matrix_exp_neg(l, 0.0) - Matrix::Identity(2, 2)) < 1e-14);
    CHECK(th::max_abs(matrix_exp_neg(l, 50.0) - Matrix::Constant(2, 2, 0.5)) < 1e-12);
    CHECK(matrix_exp_neg(Matrix::Zero(1, 1), 3.0)(0, 0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(matrix_exp_neg(l, -1.0), Error);
  }

  TEST_CASE("matrix_exp_neg conserves mass on random Laplacians") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index n = 2 + trial % 7;
      Matrix w = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) w(i, j) = w(j, i) = rng.uniform(0.0, 2.0);
      Matrix l = Matrix(w.rowwise().sum().asDiagonal()) - w;
      const Matrix h = matrix_exp_neg(l, rng.uniform(0.0, 3.0));
      CHECK(th::max_abs(h * Vector::Ones(n) - Vector::Ones(n)) < 1e-10);
    }
  }

  TEST_CASE("mvn_sample degenerate, moments and determinism") {
    Rng rng(1);
    Vector m(2);
    m << 1.5, -2.0;
    CHECK(mvn_sample(m, Matrix::Zero(2, 2), rng) == m);
    Rng big(99);
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += mvn_sample(Vector::Zero(1), Matrix::Identity(1, 1), big)(0);
    CHECK(std::abs(sum / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    Rng a(5), b(5);
    Matrix p = th::random_spd(3, a);
    Rng c(6), d(6);
    CHECK(mvn_sample(Vector::Zero(3), p, c) == mvn_sample(Vector::Zero(3), p, d));
  }

  TEST_CASE("rng streams fork deterministically and differ") {
    Rng r(42);
    Rng f1 = r.fork(1), f1b = r.fork(1), f2 = r.fork(2);
    const double a = f1.normal(), b = f1b.normal(), c = f2.normal();
    CHECK(a == b);
    CHECK(a != c);
  }

  TEST_CASE("wrap_angle stays in (-pi, pi]") {
    CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(3 * M_PI / 2) == doctest::Approx(-M_PI / 2));
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      const double w = wrap_angle(rng.uniform(-50.0, 50.0));
      CHECK(w > -M_PI);
      CHECK(w <= M_PI);
    }
  }
}
