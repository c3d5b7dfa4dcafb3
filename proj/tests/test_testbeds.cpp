#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"

using namespace coinfer;

namespace {

std::string two_bus(double r, double x) {
  return "function mpc = toy\nmpc.baseMVA = 100;\nmpc.bus = [\n"
         "1 3 0 0 0 0 1 1 0 345 1 1.1 0.9;\n"
         "2 1 50 10 0 0 1 1 0 345 1 1.1 0.9;\n];\n"
         "mpc.gen = [\n1 50 0 300 -300 1 100 1 250 10;\n];\n"
         "mpc.branch = [\n1 2 " +
         std::to_string(r) + " " + std::to_string(x) + " 0 250 250 250 0 0 1 -360 360;\n];\n";
}

std::string data_file(const char* name) { return std::string(COINFER_TEST_DATA_DIR) + "/" + name; }

void check_partition(const Clusters& c, std::size_t n, const std::vector<std::size_t>& gens, std::size_t s_max) {
  std::vector<int> seen(n, 0);
  for (const auto& cl : c) {
    CHECK(cl.size() <= s_max);
    CHECK_FALSE(cl.empty());
    for (auto v : cl) ++seen.at(v);
  }
  for (int s : seen) CHECK(s == 1);
  for (auto g : gens) {
    int holders = 0;
    for (const auto& cl : c)
      if (std::find(cl.begin(), cl.end(), g) != cl.end()) ++holders;
    CHECK(holders == 1);
  }
}

}  // namespace

TEST_SUITE("testbeds") {
  TEST_CASE("uniform chain matrices") {
    const auto p = uniform_chain(4, 500.0, 5e4, 300.0);
    const Matrix k = chain_stiffness(p), c = chain_damping(p);
    CHECK(k(0, 0) == doctest::Approx(1e5));
    CHECK(k(1, 1) == doctest::Approx(1e5));
    CHECK(k(2, 2) == doctest::Approx(1e5));
    CHECK(k(3, 3) == doctest::Approx(5e4));
    CHECK(k(0, 1) == doctest::Approx(-5e4));
    CHECK(k(0, 2) == 0.0);
    CHECK(th::max_abs(k - k.transpose()) == 0.0);
    CHECK(c(3, 3) == doctest::Approx(300.0));
    CHECK(c(0, 0) == doctest::Approx(600.0));
    ChainParams bad = p;
    bad.mass[2] = 0.0;
    CHECK_THROWS_AS(validate(bad), Error);
  }

  TEST_CASE("two-DOF chain is a single subsystem") {
    const auto parts = pair_partition(2);
    REQUIRE(parts.size() == 1);
    ChainFilterSpec spec;
    spec.estimator = EstimatorKind::DeterministicPropagate;
    spec.x0 = spec.v0 = Vector::Zero(2);
    const auto sys = build_chain(uniform_chain(2, 1.0, 10.0, 0.1), parts, spec);
    CHECK(sys.nodes.size() == 1);
    CHECK(sys.edges.empty());
    CHECK(pair_partition(5).back().dofs.size() == 3);
  }

  TEST_CASE("subsystem models agree with the monolithic accelerations") {
    Rng rng(41);
    for (std::size_t n : {4u, 6u, 7u}) {
      ChainParams p = uniform_chain(n, 500.0, 5e4, 300.0);
      for (std::size_t i = 0; i < n; ++i) p.mass[i] += 100.0 * i;
      ChainFilterSpec spec;
      spec.estimator = EstimatorKind::DeterministicPropagate;
      spec.x0 = 1e-3 * rng.normal_vector(static_cast<Eigen::Index>(n));
      spec.v0 = 1e-2 * rng.normal_vector(static_cast<Eigen::Index>(n));
      const auto sys = build_chain(p, pair_partition(n), spec);
      const auto g = sys.graph();
      const Vector global = chain_accelerations(p, spec.x0, spec.v0, Vector::Zero(static_cast<Eigen::Index>(n)));
      const auto reg = GlobalRegister::initial(g);
      for (std::size_t s = 0; s < g.size(); ++s) {
        const auto& nd = g.node(s);
        const auto m = static_cast<Eigen::Index>(sys.parts[s].dofs.size());
        const Vector d = nd.model.derivative(nd.belief.mean, collect_messages(g, s, reg).u);
        for (Eigen::Index j = 0; j < m; ++j)
          CHECK(std::abs(d(m + j) - global(static_cast<Eigen::Index>(sys.global_dof(s, j)))) <
                1e-12 * std::max(1.0, std::abs(global.maxCoeff())));
      }
    }
  }

  TEST_CASE("two-bus admittance and coupling") {
    const GridCase c = parse_matpower_case(two_bus(0.12, 0.16), "toy");
    REQUIRE(c.n_bus() == 2);
    const auto y = build_ybus(c);
    const std::complex<double> z(0.12, 0.16);
    CHECK(std::abs(y(0, 1) - (-1.0 / z)) < 1e-12);
    // -1/z = -3 + 4j here
    CHECK(std::abs(y(0, 1) - std::complex<double>(-3.0, 4.0)) < 1e-12);
    const Matrix k = coupling_from_ybus(c, CouplingMode::Magnitude);
    CHECK(k(0, 1) == doctest::Approx(5.0));
    CHECK(k(0, 0) == 0.0);
    CHECK(k(1, 1) == 0.0);
    const GridCase res = parse_matpower_case(two_bus(0.5, 0.0), "resistive");
    CHECK(std::abs(coupling_from_ybus(res, CouplingMode::Susceptance)(0, 1)) < 1e-15);
  }

  TEST_CASE("malformed case text is a parse error") {
    CHECK_THROWS_AS(parse_matpower_case("mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0;\n", "bad"), Error);
    CHECK_THROWS_AS(parse_matpower_case("mpc.bus = [ 1 x 0 ];", "bad"), Error);
  }

  TEST_CASE("bundled cases") {
    const GridCase c9 = load_matpower_case(data_file("case9.m"));
    CHECK(c9.n_bus() == 9);
    CHECK(c9.generator_buses().size() == 3);
    const GridCase c14 = load_matpower_case(data_file("case14.m"));
    CHECK(c14.n_bus() == 14);
    CHECK(c14.generator_buses().size() == 5);
  }

  TEST_CASE("generator-seeded partitions") {
    for (const char* name : {"case9.m", "case14.m"}) {
      const GridCase c = load_matpower_case(data_file(name));
      const Matrix k = coupling_from_ybus(c, CouplingMode::Magnitude);
      const auto gens = c.generator_buses();
      for (std::size_t s : {1u, 2u, 3u, 5u, 20u}) {
        CAPTURE(name);
        CAPTURE(s);
        PartitionConfig cfg;
        cfg.s_max = s;
        const auto cl = partition_generator_seeded(k, gens, cfg);
        check_partition(cl, c.n_bus(), gens, s);
        if (s == 1) CHECK(cl.size() == c.n_bus());
      }
    }
    const GridCase c9 = load_matpower_case(data_file("case9.m"));
    const auto p9 = partition_generator_seeded(coupling_from_ybus(c9, CouplingMode::Magnitude),
                                               c9.generator_buses(), PartitionConfig{});
    CHECK(p9.size() == 3);
    const GridCase c14 = load_matpower_case(data_file("case14.m"));
    const auto p14 = partition_generator_seeded(coupling_from_ybus(c14, CouplingMode::Magnitude),
                                                c14.generator_buses(), PartitionConfig{});
    CHECK(p14.size() == 5);
  }

  TEST_CASE("Kuramoto parameter draws") {
    const GridCase c = load_matpower_case(data_file("case14.m"));
    Rng a(3), b(3);
    const auto m1 = build_kuramoto(c, CouplingMode::Magnitude, KuramotoOrder::Second, a);
    const auto m2 = build_kuramoto(c, CouplingMode::Magnitude, KuramotoOrder::Second, b);
    CHECK(m1.natural == m2.natural);
    CHECK(m1.damping == m2.damping);
    CHECK(m1.theta0 == m2.theta0);
    Rng rng(4);
    std::set<long> omegas;
    for (int draw = 0; draw < 1000 / 14 + 1; ++draw) {
      const auto m = build_kuramoto(c, CouplingMode::Magnitude, KuramotoOrder::Second, rng);
      for (std::size_t i = 0; i < m.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        CHECK(m.damping(ii) >= 0.1 - 1e-12);
        CHECK(m.damping(ii) <= 0.3 + 1e-12);
        CHECK(std::abs(m.damping(ii) * 100 - std::round(m.damping(ii) * 100)) < 1e-9);
        CHECK(std::abs(m.natural(ii)) <= 1.0 + 1e-12);
        CHECK(std::abs(m.natural(ii) * 10 - std::round(m.natural(ii) * 10)) < 1e-9);
        omegas.insert(std::lround(m.natural(ii) * 10));
        CHECK(std::abs(m.theta0(ii)) <= 0.5);
        CHECK(std::abs(m.omega0(ii)) <= 0.2);
      }
    }
    CHECK(omegas.size() == 21);
  }

  TEST_CASE("uncoupled buses settle at natural over damping") {
    KuramotoModel m;
    m.natural = Vector::LinSpaced(3, -0.5, 0.5);
    m.damping = Vector::Constant(3, 0.25);
    m.k = Matrix::Zero(3, 3);
    m.theta0 = Vector::Zero(3);
    m.omega0 = Vector::Zero(3);
    Vector s = m.initial_state();
    const Derivative f = [&m](const Vector& x, const Vector&) { return m.derivative(x); };
    for (int n = 0; n < 10000; ++n) s = integrate_step(IntegratorKind::Heun, f, s, Vector(), 0.01).next;
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(s(3 + i) == doctest::Approx(m.natural(i) / 0.25).epsilon(1e-6));
  }

  TEST_CASE("truth simulation noise and wrapping") {
    const Derivative spin = [](const Vector& x, const Vector&) { return Vector::Constant(1, 5.0).eval(); };
    const Measurement id = [](const Vector& x, const Vector&) { return x; };
    Rng rng(9);
    const auto clean = simulate_truth(spin, id, Vector::Zero(1), 300, 0.01, IntegratorKind::Heun, Matrix(),
                                      Vector::Zero(1), rng, {0}, {0});
    CHECK(clean.states.rows() == 301);
    CHECK(clean.measurements == clean.clean);
    CHECK(clean.states.col(0).maxCoeff() <= M_PI);
    CHECK(clean.states.col(0).minCoeff() > -M_PI);
    const Derivative still = [](const Vector& x, const Vector&) { return Vector(Vector::Zero(x.size())); };
    const auto noisy = simulate_truth(still, id, Vector::Zero(1), 10000, 0.01, IntegratorKind::Heun, Matrix(),
                                      Vector::Constant(1, 0.02), rng);
    const Vector r = noisy.measurements.col(0) - noisy.clean.col(0);
    const double sd = std::sqrt(r.squaredNorm() / r.size());
    CHECK(std::abs(sd - 0.02) < 0.05 * 0.02);
  }
}
