#include <doctest.h>

#include "helpers.hpp"

using namespace coinfer;

namespace {
Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}
const Derivative decay = [](const Vector& x, const Vector&) { return Vector(-x); };
}  // namespace

TEST_SUITE("models") {
  TEST_CASE("zero derivative is a fixed point for every integrator") {
    const Derivative zero = [](const Vector& x, const Vector&) { return Vector(Vector::Zero(x.size())); };
    const Vector x = vec({1.0, -2.0, 3.5});
    for (auto k : {IntegratorKind::Euler, IntegratorKind::Heun, IntegratorKind::AB2})
      CHECK(integrate_step(k, zero, x, Vector(), 0.1).next == x);
  }

  TEST_CASE("Heun on exponential decay") {
    const auto r = integrate_step(IntegratorKind::Heun, decay, vec({1.0}), Vector(), 0.1);
    CHECK(r.next(0) == doctest::Approx(0.905).epsilon(1e-14));
    CHECK(r.f(0) == doctest::Approx(-1.0));
  }

  TEST_CASE("AB2 with a stored derivative") {
    const Vector prev = vec({-1.0});
    const auto r = integrate_step(IntegratorKind::AB2, decay, vec({1.0}), Vector(), 0.1, &prev);
    CHECK(r.next(0) == doctest::Approx(0.9).epsilon(1e-14));
    // bootstrap step without history matches Heun
    const auto boot = integrate_step(IntegratorKind::AB2, decay, vec({1.0}), Vector(), 0.1);
    CHECK(boot.next(0) == doctest::Approx(0.905));
  }

  TEST_CASE("Heun matches second-order Taylor on a linear system") {
    Matrix a(2, 2);
    a << 0, 1, -4, -0.4;
    const Derivative f = [a](const Vector& x, const Vector&) { return Vector(a * x); };
    const Vector x = vec({0.3, -0.1});
    const double h = 0.01;
    const Vector expect = (Matrix::Identity(2, 2) + h * a + 0.5 * h * h * a * a) * x;
    CHECK(th::max_abs(integrate_step(IntegratorKind::Heun, f, x, Vector(), h).next - expect) < 1e-15);
  }

  TEST_CASE("non-finite derivative raises") {
    const Derivative bad = [](const Vector& x, const Vector&) { return Vector(Vector::Constant(x.size(), NAN)); };
    CHECK_THROWS_AS(integrate_step(IntegratorKind::Euler, bad, vec({1.0}), Vector(), 0.1), Error);
  }

  TEST_CASE("augment_belief block structure") {
    Rng rng(2);
    GaussianBelief b(vec({1.0, 2.0, 3.0}), th::random_spd(3, rng));
    const GaussianBelief same = augment_belief(b, Vector(), Vector());
    CHECK(same.mean == b.mean);
    CHECK(same.cov == b.cov);
    const GaussianBelief aug = augment_belief(b, vec({7.0, 8.0}), vec({0.5, 0.25}));
    REQUIRE(aug.dim() == 5);
    CHECK(aug.mean.head(3) == b.mean);
    CHECK(aug.cov.topLeftCorner(3, 3) == b.cov);
    CHECK(aug.cov.topRightCorner(3, 2).isZero());
    CHECK(aug.cov.bottomLeftCorner(2, 3).isZero());
    CHECK(aug.cov(3, 3) == 0.5);
    CHECK(aug.cov(4, 4) == 0.25);
    CHECK(aug.cov(3, 4) == 0.0);
  }

  TEST_CASE("GaussianBelief rejects asymmetric or mismatched covariance") {
    Matrix p(2, 2);
    p << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS(GaussianBelief(vec({0.0, 0.0}), p), Error);
    CHECK_THROWS_AS(GaussianBelief(vec({0.0}), Matrix::Identity(2, 2)), Error);
  }

  TEST_CASE("discretize agrees with integrate_step") {
    const Transition t = discretize(decay, IntegratorKind::Heun, 0.1);
    CHECK(t(vec({2.0}), Vector())(0) == doctest::Approx(1.81));
  }
}
