#include <benchmark/benchmark.h>

#include <string>

#include "coinfer/coinfer.hpp"

using namespace coinfer;

namespace {

Matrix spd(Eigen::Index n, Rng& rng) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return a * a.transpose() + Matrix::Identity(n, n);
}

ChainSystem chain(std::size_t n, EstimatorKind est) {
  auto parts = pair_partition(n);
  for (auto& p : parts) {
    p.measured_dofs = {p.dofs.back()};
    p.meas_var = {1e-4};
  }
  ChainFilterSpec spec;
  spec.estimator = est;
  spec.integrator = IntegratorKind::Euler;
  spec.dt = 1e-3;
  spec.qx = 1e-14;
  spec.qv = 1e-12;
  spec.p0_x = spec.p0_v = 1e-6;
  spec.x0 = Vector::Zero(static_cast<Eigen::Index>(n));
  spec.v0 = Vector::Zero(static_cast<Eigen::Index>(n));
  spec.x0(0) = 0.01;
  if (est == EstimatorKind::DeterministicPropagate)
    for (auto& p : parts) p.measured_dofs.clear(), p.meas_var.clear();
  return build_chain(uniform_chain(n, 500.0, 5e4, 300.0), parts, spec);
}

MeasurementSet zero_data(const SystemGraph& g, long steps) {
  MeasurementSet d;
  for (const auto& nd : g.nodes())
    if (nd.model.obs_dim > 0) d[nd.id].measurements = Matrix::Zero(steps, nd.model.obs_dim);
  return d;
}

ScheduleConfig schedule(double horizon, double dt) {
  ScheduleConfig sc;
  sc.horizon = horizon;
  sc.dt = dt;
  return sc;
}

}  // namespace

static void BM_Cholesky(benchmark::State& st) {
  Rng rng(1);
  const Matrix a = spd(st.range(0), rng);
  for (auto _ : st) benchmark::DoNotOptimize(cholesky(a));
}
BENCHMARK(BM_Cholesky)->RangeMultiplier(2)->Range(4, 64);

static void BM_UkfStep(benchmark::State& st) {
  const Eigen::Index n = st.range(0);
  Rng rng(2);
  StateSpaceModel m;
  m.state_dim = n;
  m.obs_dim = n / 2;
  m.dt = 0.01;
  m.transition = [](const Vector& x, const Vector&) { return Vector(x.array().sin() * 0.1 + x.array()); };
  m.measurement = [k = n / 2](const Vector& x, const Vector&) { return Vector(x.head(k)); };
  m.q = 1e-4 * Matrix::Identity(n, n);
  m.r = 1e-2 * Matrix::Identity(n / 2, n / 2);
  GaussianBelief b(rng.normal_vector(n), spd(n, rng));
  const Vector y = rng.normal_vector(n / 2);
  for (auto _ : st) benchmark::DoNotOptimize(ukf_step(m, b, Vector(), y));
  st.SetComplexityN(n);
}
BENCHMARK(BM_UkfStep)->RangeMultiplier(2)->Range(4, 64)->Complexity();

static void BM_ChainForwardJacobi(benchmark::State& st) {
  const auto sys = chain(static_cast<std::size_t>(st.range(0)), EstimatorKind::DeterministicPropagate);
  const auto g = sys.graph();
  const auto sc = schedule(1.0, 1e-3);
  for (auto _ : st) benchmark::DoNotOptimize(run_jacobi(g, sc, {}));
}
BENCHMARK(BM_ChainForwardJacobi)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_ChainDistributedUkf(benchmark::State& st) {
  const auto sys = chain(static_cast<std::size_t>(st.range(0)), EstimatorKind::UKF);
  const auto g = sys.graph();
  const auto sc = schedule(0.2, 1e-3);
  const auto data = zero_data(g, sc.steps());
  for (auto _ : st) benchmark::DoNotOptimize(run_jacobi(g, sc, data));
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_ChainDistributedUkf)->RangeMultiplier(2)->Range(8, 64)->Complexity()->Unit(benchmark::kMillisecond);

static void BM_ChainCentralizedUkf(benchmark::State& st) {
  const auto sys = chain(static_cast<std::size_t>(st.range(0)), EstimatorKind::UKF);
  const auto g = build_graph({sys.centralized_node()}, {});
  const auto sc = schedule(0.2, 1e-3);
  const auto data = zero_data(g, sc.steps());
  for (auto _ : st) benchmark::DoNotOptimize(run_jacobi(g, sc, data));
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_ChainCentralizedUkf)->RangeMultiplier(2)->Range(8, 64)->Complexity()->Unit(benchmark::kMillisecond);

static void BM_GridPartition(benchmark::State& st) {
  const GridCase c = load_matpower_case(std::string(COINFER_BENCH_DATA_DIR) + "/case14.m");
  const Matrix k = coupling_from_ybus(c, CouplingMode::Magnitude);
  const auto gens = c.generator_buses();
  for (auto _ : st) benchmark::DoNotOptimize(partition_generator_seeded(k, gens, PartitionConfig{}));
}
BENCHMARK(BM_GridPartition);

static void BM_GridDistributedUkf(benchmark::State& st) {
  const GridCase c = load_matpower_case(std::string(COINFER_BENCH_DATA_DIR) + "/case9.m");
  Rng rng(42);
  const KuramotoModel km = build_kuramoto(c, CouplingMode::Magnitude, KuramotoOrder::Second, rng);
  const auto clusters = partition_generator_seeded(km.k, c.generator_buses(), PartitionConfig{});
  const GridSystem gs =
      build_grid_system(km, clusters, GridFilterSpec{}, GridPrior{km.theta0, km.omega0, Vector::Zero(9)});
  const auto g = gs.graph();
  const auto sc = schedule(3.0, 0.01);
  const auto data = zero_data(g, sc.steps());
  for (auto _ : st) benchmark::DoNotOptimize(run_jacobi(g, sc, data));
}
BENCHMARK(BM_GridDistributedUkf)->Unit(benchmark::kMillisecond);

static void BM_HeatKernel(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  const auto g = DiffusionGraph::from_edges(n, edges, std::vector<double>(edges.size(), 1.0));
  Vector q = Vector::Zero(static_cast<Eigen::Index>(n));
  q(0) = 1.0;
  for (auto _ : st) benchmark::DoNotOptimize(heat_kernel_scores(g, 0.9, q));
}
BENCHMARK(BM_HeatKernel)->Arg(3)->Arg(16)->Arg(64);
BENCHMARK_MAIN();
