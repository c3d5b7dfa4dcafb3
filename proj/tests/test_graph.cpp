#include <doctest.h>

#include "helpers.hpp"

using namespace coinfer;

namespace {

class ConstantLaw final : public InterfaceLaw {
 public:
  explicit ConstantLaw(double v) : v_(v) {}
  std::string name() const override { return "constant"; }
  Eigen::Index sender_dim() const override { return 1; }
  Eigen::Index receiver_dim() const override { return 0; }
  Eigen::Index output_dim() const override { return 1; }
  Vector eval(const Vector&, const Vector&) const override { return Vector::Constant(1, v_); }

 private:
  double v_;
};

// x' = v, v' = u - x
SubsystemNode oscillator(int id, double x0, double p0 = 0.0) {
  SubsystemNode n;
  n.id = id;
  n.name = "osc" + std::to_string(id);
  n.model.state_dim = 2;
  n.model.input_dim = 1;
  n.model.dt = 0.01;
  n.model.derivative = [](const Vector& z, const Vector& u) {
    Vector d(2);
    d << z(1), u(0) - z(0);
    return d;
  };
  n.model.q = Matrix::Zero(2, 2);
  n.model.r = Matrix::Zero(0, 0);
  n.estimator = EstimatorKind::DeterministicPropagate;
  Vector m(2);
  m << x0, 0.0;
  n.belief = GaussianBelief(m, p0 * Matrix::Identity(2, 2));
  n.interface_selector = {0, 1};
  return n;
}

InterfaceEdge constant_edge(int s, int r, double v) {
  InterfaceEdge e;
  e.sender = s;
  e.receiver = r;
  e.law = std::make_shared<ConstantLaw>(v);
  e.sender_selector = {0};
  e.receiver_selector = {};
  return e;
}

InterfaceEdge spring_edge(int s, int r, double k, MessageMode mode = MessageMode::Deterministic) {
  InterfaceEdge e;
  e.sender = s;
  e.receiver = r;
  e.law = std::make_shared<SpringDamperEdgeLaw>(SpringDamperLaw{k, 0.0, 1.0});
  e.mode = mode;
  e.target_state_index = 1;
  return e;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("build_graph validation") {
    CHECK_THROWS_AS(build_graph({oscillator(1, 0), oscillator(1, 0)}, {}), Error);
    CHECK_THROWS_AS(build_graph({oscillator(1, 0)}, {spring_edge(1, 2, 1.0)}), Error);
    auto bad = spring_edge(1, 2, 1.0);
    bad.sender_selector = {0, 5};
    CHECK_THROWS_AS(build_graph({oscillator(1, 0), oscillator(2, 0)}, {bad}), Error);
    auto prob = spring_edge(1, 2, 1.0, MessageMode::Probabilistic);
    prob.target_state_index = -1;
    CHECK_THROWS_AS(build_graph({oscillator(1, 0), oscillator(2, 0)}, {prob}), Error);
    try {
      build_graph({oscillator(1, 0), oscillator(1, 0)}, {});
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DuplicateNodeId);
    }
  }

  TEST_CASE("messages add per target input") {
    const auto g = build_graph({oscillator(1, 0), oscillator(2, 0), oscillator(3, 0)},
                               {constant_edge(1, 3, 3.0), constant_edge(2, 3, -1.0)});
    const auto reg = GlobalRegister::initial(g);
    const auto agg = collect_messages(g, g.index_of(3), reg);
    CHECK(agg.u(0) == doctest::Approx(2.0));
    CHECK(agg.messages.size() == 2);
    const auto none = collect_messages(g, g.index_of(1), reg);
    CHECK(none.u.isZero());
    CHECK(none.messages.empty());
  }

  TEST_CASE("message variances add for independent edges") {
    // k^2 (P_s,xx + P_r,xx): 2^2 * 1 = 4 and 1^2 * 5 = 5 with receiver variance 0
    auto a = oscillator(1, 0, 1.0), b = oscillator(2, 0, 5.0), r = oscillator(3, 0, 0.0);
    const auto g = build_graph({a, b, r}, {spring_edge(1, 3, 2.0, MessageMode::Probabilistic),
                                           spring_edge(2, 3, 1.0, MessageMode::Probabilistic)});
    const auto agg = collect_messages(g, g.index_of(3), GlobalRegister::initial(g));
    CHECK(*agg.messages[0].variance == doctest::Approx(4.0));
    CHECK(*agg.messages[1].variance == doctest::Approx(5.0));
    CHECK(agg.variance(1) == doctest::Approx(9.0));
    CHECK(agg.variance(0) == 0.0);
    // deterministic edges carry no variance
    const auto gd = build_graph({a, b, r}, {spring_edge(1, 3, 2.0), spring_edge(2, 3, 1.0)});
    const auto ad = collect_messages(gd, gd.index_of(3), GlobalRegister::initial(gd));
    CHECK_FALSE(ad.messages[0].variance.has_value());
    CHECK(ad.variance.isZero());
  }

  TEST_CASE("aggregation is independent of edge order") {
    Rng rng(6);
    std::vector<SubsystemNode> nodes;
    for (int i = 0; i < 5; ++i) nodes.push_back(oscillator(i, rng.normal()));
    std::vector<InterfaceEdge> edges;
    for (int i = 1; i < 5; ++i) edges.push_back(spring_edge(i, 0, rng.uniform(0.5, 3.0)));
    const auto g1 = build_graph(nodes, edges);
    std::reverse(edges.begin(), edges.end());
    const auto g2 = build_graph(nodes, edges);
    const double u1 = collect_messages(g1, 0, GlobalRegister::initial(g1)).u(0);
    const double u2 = collect_messages(g2, 0, GlobalRegister::initial(g2)).u(0);
    CHECK(u1 == doctest::Approx(u2).epsilon(1e-14));
  }

  TEST_CASE("select picks indices and blocks") {
    Vector x(4);
    x << 1, 2, 3, 4;
    const Vector s = select(x, {3, 1});
    CHECK(s(0) == 4);
    CHECK(s(1) == 2);
    Matrix p = Matrix::Identity(4, 4);
    p(1, 3) = p(3, 1) = 0.5;
    const Matrix b = select(p, {1, 3});
    CHECK(b(0, 1) == 0.5);
    CHECK(b.rows() == 2);
  }

  TEST_CASE("embedding a singleton with identity ports changes nothing") {
    const auto outer = build_graph({oscillator(1, 0.2), oscillator(2, -0.1)},
                                   {spring_edge(1, 2, 2.0), spring_edge(2, 1, 2.0)});
    auto inner_node = oscillator(7, -0.1);
    const auto inner = build_graph({inner_node}, {});
    BoundaryPort port;
    port.outer_states = {0, 1};
    port.inner_node = 7;
    port.inner_states = {0, 1};
    port.outer_input = 0;
    port.inner_input = 0;
    port.input_width = 1;
    const auto flat = embed_subgraph(outer, 2, inner, {port});
    CHECK(flat.size() == 2);
    CHECK(flat.edges().size() == 2);
    ScheduleConfig sc;
    sc.horizon = 1.0;
    sc.dt = 0.01;
    const auto a = run_jacobi(outer, sc, {});
    const auto b = run_jacobi(flat, sc, {});
    CHECK(th::max_abs(a.node(2).mean - b.node(7).mean) == 0.0);
    CHECK(th::max_abs(a.node(1).mean - b.node(1).mean) == 0.0);
  }

  TEST_CASE("embedding without a matching port fails") {
    const auto outer = build_graph({oscillator(1, 0.2), oscillator(2, -0.1)}, {spring_edge(1, 2, 2.0)});
    const auto inner = build_graph({oscillator(7, 0)}, {});
    BoundaryPort port;
    port.outer_states = {1};
    port.inner_node = 7;
    port.inner_states = {1};
    CHECK_THROWS_AS(embed_subgraph(outer, 2, inner, {port}), Error);
    const auto clash = build_graph({oscillator(1, 0)}, {});
    port.outer_states = {0, 1};
    port.inner_node = 1;
    port.inner_states = {0, 1};
    CHECK_THROWS_AS(embed_subgraph(outer, 2, clash, {port}), Error);
  }
}
