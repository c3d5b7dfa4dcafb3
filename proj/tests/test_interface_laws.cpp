#include <doctest.h>

#include <sstream>

#include "helpers.hpp"

using namespace coinfer;

namespace {
Vector sv(double x, double v) {
  Vector s(2);
  s << x, v;
  return s;
}

LearnedLaw reference_law() {
  LearnedLaw l;
  l.xi = {5.613034e4, 3.308257e2, -2.863096e8, 6.696752e3, 0.0, 0.0};
  return l;
}
}  // namespace

TEST_SUITE("interface_laws") {
  TEST_CASE("spring-damper evaluation") {
    const SpringDamperLaw law{100.0, 2.0, 1.0};
    CHECK(eval_spring_damper(law, sv(0.0, 0.0), sv(0.0, 0.0)) == 0.0);
    CHECK(eval_spring_damper(law, sv(0.01, 0.0), sv(0.0, 0.0)) == doctest::Approx(1.0));
    CHECK(eval_spring_damper(law, sv(0.0, 0.5), sv(0.0, 0.0)) == doctest::Approx(1.0));
    const SpringDamperLaw flip{100.0, 2.0, -1.0};
    CHECK(eval_spring_damper(flip, sv(0.01, 0.0), sv(0.0, 0.0)) == doctest::Approx(-1.0));
  }

  TEST_CASE("interface force variance hand values") {
    const Matrix z = Matrix::Zero(2, 2);
    CHECK(interface_force_variance(z, z, 5e4, 300.0) == 0.0);
    const Matrix p = 1e-6 * Matrix::Identity(2, 2);
    CHECK(interface_force_variance(p, p, 5e4, 300.0) == doctest::Approx(5000.18).epsilon(1e-12));
    Matrix only_x = Matrix::Zero(2, 2);
    only_x(0, 0) = 0.5;
    CHECK(interface_force_variance(only_x, only_x, 2.0, 7.0) == doctest::Approx(4.0));
  }

  TEST_CASE("interface force variance against Monte Carlo") {
    Rng rng(17);
    const int n = 200000;
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix p1 = 1e-4 * th::random_spd(2, rng);
      const Matrix p2 = 1e-4 * th::random_spd(2, rng);
      const double k = rng.uniform(1e3, 1e5), c = rng.uniform(10.0, 500.0);
      const double analytic = interface_force_variance(p1, p2, k, c);
      const SpringDamperLaw law{k, c, 1.0};
      double s = 0.0, s2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const Vector a = mvn_sample(Vector::Zero(2), p1, rng);
        const Vector b = mvn_sample(Vector::Zero(2), p2, rng);
        const double f = eval_spring_damper(law, a, b);
        s += f;
        s2 += f * f;
      }
      const double mc = s2 / n - (s / n) * (s / n);
      CHECK(std::abs(mc - analytic) / analytic < 0.02);
    }
  }

  TEST_CASE("incremental variance telescopes") {
    VarianceTracker t(1);
    CHECK(incremental_variance(t, 0, 0.0) == 0.0);
    CHECK(incremental_variance(t, 0, 3.0) == 3.0);
    CHECK(incremental_variance(t, 0, 5.0) == 2.0);
    CHECK(incremental_variance(t, 0, 4.0) == 0.0);
    CHECK(t.last(0) == 4.0);
    Rng rng(3);
    VarianceTracker u(1);
    double v = 0.0, total = 0.0;
    for (int i = 0; i < 100; ++i) {
      v += rng.uniform(0.0, 1.0);
      total += u.incremental(0, v);
    }
    CHECK(total == doctest::Approx(v));
  }

  TEST_CASE("process noise injection") {
    const Matrix q = Matrix::Zero(4, 4);
    CHECK(inject_process_noise(q, 0.0, 1e-3, 500.0, 3) == q);
    const Matrix out = inject_process_noise(q, 5000.18, 1e-3, 500.0, 3);
    CHECK(out(3, 3) == doctest::Approx(4e-12 * 5000.18).epsilon(1e-12).scale(0));
    CHECK(out(2, 2) == 0.0);
    CHECK_THROWS_AS(inject_process_noise(q, -1.0, 1e-3, 500.0, 3), Error);
  }

  TEST_CASE("learned law evaluation") {
    LearnedLaw zero;
    CHECK(eval_learned_law(zero, 0.3, -0.2) == 0.0);
    CHECK(eval_learned_law(reference_law(), 1e-4, 0.0) == doctest::Approx(5.6127).epsilon(1e-4));
    LearnedLaw lin;
    lin.xi = {5e4, 300.0, 0, 0, 0, 0};
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
      const double dx = rng.normal(0, 1e-3), dv = rng.normal(0, 1e-2);
      CHECK(eval_learned_law(lin, dx, dv) ==
            doctest::Approx(eval_spring_damper({5e4, 300.0, 1.0}, sv(dx, dv), sv(0, 0))));
    }
    const auto g = learned_law_gradient(reference_law(), 1e-4, 0.0);
    CHECK(g[0] == doctest::Approx(5.613034e4 - 3 * 2.863096e8 * 1e-8));
    CHECK(g[1] == doctest::Approx(3.308257e2));
  }

  TEST_CASE("learned law text round trip") {
    LearnedLaw l = reference_law();
    l.xi[5] = 1.0 / 3.0;
    std::stringstream ss;
    write_learned_law(ss, l);
    const LearnedLaw back = read_learned_law(ss);
    for (int i = 0; i < 6; ++i) CHECK(back.xi[i] == l.xi[i]);
    std::stringstream bad("dx 1.0\nbogus");
    CHECK_THROWS_AS(read_learned_law(bad), Error);
  }

  TEST_CASE("edge laws expose consistent linearisations") {
    const SpringDamperEdgeLaw sd({5e4, 300.0, 1.0});
    const Vector s = sv(1e-3, 0.01), r = sv(-2e-4, 0.0);
    Rng rng(4);
    const Matrix ps = 1e-6 * th::random_spd(2, rng), pr = 1e-6 * th::random_spd(2, rng);
    CHECK(sd.variance(s, ps, r, pr) == doctest::Approx(interface_force_variance(ps, pr, 5e4, 300.0)));
    LearnedLaw lin;
    lin.xi = {5e4, 300.0, 0, 0, 0, 0};
    const LearnedEdgeLaw le(lin);
    CHECK(le.eval(s, r)(0) == doctest::Approx(sd.eval(s, r)(0)));
    const LearnedEdgeLaw react(reference_law(), 1.0, true);
    const LearnedEdgeLaw act(reference_law());
    CHECK(react.eval(r, s)(0) == doctest::Approx(-act.eval(s, r)(0)));
  }

  TEST_CASE("Kuramoto coupling message") {
    const KuramotoCouplingLaw law(2.0);
    Vector th(1);
    th << 0.4;
    const Vector out = law.eval(th, Vector());
    CHECK(out(0) == doctest::Approx(2.0 * std::sin(0.4)));
    CHECK(out(1) == doctest::Approx(2.0 * std::cos(0.4)));
    // receiver reconstructs K sin(theta_j - theta_a)
    const double ta = -0.3;
    CHECK(out(0) * std::cos(ta) - out(1) * std::sin(ta) == doctest::Approx(2.0 * std::sin(0.4 - ta)));
  }
}
