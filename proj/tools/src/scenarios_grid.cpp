#include <algorithm>
#include <cmath>
#include <filesystem>

#include "scenario_util.hpp"

namespace coinfer::cli {

using namespace detail;

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kGridMethods = {"centralized", "distributed", "wls", "wnls"};

json grid_defaults() {
  return {{"seed", 42},
          {"replicates", 1},
          {"horizon", 3.0},
          {"dt", 0.01},
          {"sigma", 0.02},
          {"coupling", "magnitude"},
          {"s_max", 5},
          {"epsilon", 1e-12},
          {"p0_theta", 0.25},
          {"p0_omega", 0.25},
          {"p0_natural", 1.0},
          {"q_theta", 1e-4},
          {"q_omega", 1e-4},
          {"q_natural_centralized", 1e-4},
          {"q_natural_distributed", 1e-9},
          {"prior_std", 0.04},
          {"natural_prior", 0.0},
          {"inner_iterations", 1},
          {"ukf", {{"alpha", 1.0}, {"beta", 2.0}, {"kappa", 0.0}}},
          {"wnls", {{"iterations", 5}, {"damping", 0.5}, {"max_backtracks", 30}}}};
}

struct GridSetup {
  GridCase gc;
  KuramotoModel km;
  TruthRun truth;
  GridPrior prior;
  std::string hash;
  Clusters partition;
};

GridSetup grid_setup(const std::string& path, const json& p, std::uint64_t seed) {
  GridSetup s;
  s.gc = load_matpower_case(path);
  s.hash = sha256_file(path);
  const std::string cm = str(p, "coupling");
  if (cm != "magnitude" && cm != "susceptance") fail(ErrorKind::ConfigInvalid, "coupling must be magnitude or susceptance");
  const CouplingMode mode = cm == "magnitude" ? CouplingMode::Magnitude : CouplingMode::Susceptance;
  Rng rng(seed);
  s.km = build_kuramoto(s.gc, mode, KuramotoOrder::Second, rng);
  const auto n = static_cast<Eigen::Index>(s.km.size());
  const double dt = num(p, "dt");
  const long steps = std::lround(num(p, "horizon") / dt);
  const KuramotoModel km = s.km;
  const Derivative f = [km](const Vector& z, const Vector&) { return km.derivative(z); };
  const Measurement h = [](const Vector& z, const Vector&) { return z; };
  std::vector<Eigen::Index> angles(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) angles[static_cast<std::size_t>(i)] = i;
  Rng noise = rng.fork(1);
  s.truth = simulate_truth(f, h, s.km.initial_state(), steps, dt, IntegratorKind::Heun, Matrix(steps, 0),
                           Vector::Constant(2 * n, num(p, "sigma")), noise, angles, angles);
  Rng prior_rng = rng.fork(2);
  const double ps = num(p, "prior_std");
  s.prior.theta.resize(n);
  s.prior.omega.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.prior.theta(i) = wrap_angle(s.km.theta0(i) + prior_rng.normal(0.0, ps));
  for (Eigen::Index i = 0; i < n; ++i) s.prior.omega(i) = s.km.omega0(i) + prior_rng.normal(0.0, ps);
  s.prior.natural = Vector::Constant(n, num(p, "natural_prior"));
  PartitionConfig pc;
  pc.s_max = static_cast<std::size_t>(integer(p, "s_max"));
  pc.epsilon = num(p, "epsilon");
  s.partition = partition_generator_seeded(s.km.k, s.gc.generator_buses(), pc);
  return s;
}

Vector unwrap(const Vector& a) {
  Vector out = a;
  for (Eigen::Index i = 1; i < a.size(); ++i) out(i) = out(i - 1) + wrap_angle(a(i) - a(i - 1));
  return out;
}

double range_of(const Vector& v) { return v.maxCoeff() - v.minCoeff(); }

json grid_method(const GridSetup& s, const json& p, const std::string& method, int threads, RunTrace* keep,
                 Clusters* used) {
  GridFilterSpec spec;
  spec.dt = num(p, "dt");
  spec.p0_theta = num(p, "p0_theta");
  spec.p0_omega = num(p, "p0_omega");
  spec.p0_natural = num(p, "p0_natural");
  spec.q_theta = num(p, "q_theta");
  spec.q_omega = num(p, "q_omega");
  spec.sigma = num(p, "sigma");
  spec.ukf = ukf_from_json(p.at("ukf"));
  spec.wnls.iterations = p.at("wnls").at("iterations").get<int>();
  spec.wnls.damping = p.at("wnls").at("damping").get<double>();
  spec.wnls.max_backtracks = p.at("wnls").at("max_backtracks").get<int>();
  const std::size_t n = s.km.size();
  Clusters clusters = s.partition;
  if (method == "centralized") {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    clusters = {all};
    spec.estimator = EstimatorKind::UKF;
    spec.q_natural = num(p, "q_natural_centralized");
  } else if (method == "distributed") {
    spec.estimator = EstimatorKind::UKF;
    spec.q_natural = num(p, "q_natural_distributed");
  } else if (method == "wls" || method == "wnls") {
    spec.estimator = method == "wls" ? EstimatorKind::WLS : EstimatorKind::WNLS;
    spec.augment = false;
    spec.q_natural = num(p, "q_natural_distributed");
  } else {
    fail(ErrorKind::ConfigInvalid, "unknown grid method '" + method + "'");
  }
  const GridSystem gs = build_grid_system(s.km, clusters, spec, s.prior);
  const long steps = s.truth.measurements.rows();
  MeasurementSet data;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& mem = clusters[c];
    const auto m = static_cast<Eigen::Index>(mem.size());
    NodeSeries ns;
    ns.measurements.resize(steps, 2 * m);
    for (Eigen::Index a = 0; a < m; ++a) {
      const auto bus = static_cast<Eigen::Index>(mem[static_cast<std::size_t>(a)]);
      ns.measurements.col(a) = s.truth.measurements.col(bus);
      ns.measurements.col(m + a) = s.truth.measurements.col(static_cast<Eigen::Index>(n) + bus);
    }
    data[static_cast<int>(c)] = std::move(ns);
  }
  ScheduleConfig sc;
  sc.kind = ScheduleKind::Jacobi;
  sc.inner_iterations = integer(p, "inner_iterations");
  sc.horizon = num(p, "horizon");
  sc.dt = spec.dt;
  sc.threads = threads;
  const RunTrace tr = run_schedule(gs.graph(), sc, data);

  // Per-bus series, rows 1..steps (posteriors).
  const auto N = static_cast<Eigen::Index>(n);
  Matrix th(steps, N), thv(steps, N), om(steps, N), omv(steps, N), nat(steps, N), natv(steps, N);
  const bool aug = spec.augment;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& nt = tr.node(static_cast<int>(c));
    const auto m = static_cast<Eigen::Index>(clusters[c].size());
    for (Eigen::Index a = 0; a < m; ++a) {
      const auto bus = static_cast<Eigen::Index>(clusters[c][static_cast<std::size_t>(a)]);
      th.col(bus) = nt.mean.col(a).tail(steps);
      thv.col(bus) = nt.var.col(a).tail(steps);
      om.col(bus) = nt.mean.col(m + a).tail(steps);
      omv.col(bus) = nt.var.col(m + a).tail(steps);
      if (aug) {
        nat.col(bus) = nt.mean.col(2 * m + a).tail(steps);
        natv.col(bus) = nt.var.col(2 * m + a).tail(steps);
      }
    }
  }
  const Matrix th_true = s.truth.states.leftCols(N).bottomRows(steps);
  const Matrix om_true = s.truth.states.rightCols(N).bottomRows(steps);
  const Matrix th_err = angle_error(th, th_true);
  double th_nrmse = 0.0, om_nrmse = 0.0;
  std::vector<double> th_bus, om_bus;
  for (Eigen::Index b = 0; b < N; ++b) {
    const Vector full_unwrapped = unwrap(s.truth.states.col(b));
    const double r = range_of(full_unwrapped.tail(steps));
    const double e = std::sqrt(th_err.col(b).squaredNorm() / static_cast<double>(steps));
    th_bus.push_back(r > 0.0 ? e / r : e);
    const NrmseResult on = nrmse(om.col(b), om_true.col(b));
    om_bus.push_back(on.value);
    th_nrmse += th_bus.back();
    om_nrmse += on.value;
  }
  th_nrmse /= static_cast<double>(N);
  om_nrmse /= static_cast<double>(N);
  json j;
  j["theta_nrmse"] = th_nrmse;
  j["theta_nrmse_per_bus"] = th_bus;
  j["theta_rmse"] = std::sqrt(th_err.squaredNorm() / static_cast<double>(th_err.size()));
  j["theta_coverage95"] = coverage(th_err, Matrix::Zero(steps, N), thv, 0.95);
  j["omega_nrmse"] = om_nrmse;
  j["omega_nrmse_per_bus"] = om_bus;
  j["omega_rmse"] = rmse(om, om_true);
  j["omega_coverage95"] = coverage(om_true, om, omv, 0.95);
  if (aug) {
    Matrix nat_true(steps, N);
    for (Eigen::Index b = 0; b < N; ++b) nat_true.col(b).setConstant(s.km.natural(b));
    j["natural_rmse"] = rmse(nat, nat_true);
    j["natural_coverage95"] = coverage(nat_true, nat, natv, 0.95);
    j["natural_coverage68"] = coverage(nat_true, nat, natv, 0.68);
    Vector last = nat.row(steps - 1).transpose();
    j["natural_final"] = std::vector<double>(last.data(), last.data() + last.size());
  }
  j["seconds"] = tr.total_seconds;
  j["clusters"] = clusters.size();
  if (keep) *keep = tr;
  if (used) *used = clusters;
  return j;
}

json cluster_json(const Clusters& c) {
  json j = json::array();
  for (const auto& cl : c) {
    std::vector<std::size_t> one_based;
    for (auto b : cl) one_based.push_back(b + 1);
    j.push_back(one_based);
  }
  return j;
}

ExperimentReport run_grid(const std::string& path, const std::string& method, const RunConfig& cfg, const json& p) {
  ExperimentReport rep;
  json reps = json::array();
  for (auto seed : replicate_seeds(p)) {
    const GridSetup s = grid_setup(path, p, seed);
    RunTrace tr;
    Clusters used;
    json rj;
    rj["seed"] = seed;
    rj["methods"][method] = grid_method(s, p, method, cfg.threads, &tr, &used);
    reps.push_back(rj);
    if (rep.trajectories.empty()) {
      const auto N = static_cast<Eigen::Index>(s.km.size());
      std::vector<std::pair<std::string, Vector>> cols;
      for (std::size_t c = 0; c < used.size(); ++c) {
        const auto& nt = tr.node(static_cast<int>(c));
        const auto m = static_cast<Eigen::Index>(used[c].size());
        for (Eigen::Index a = 0; a < m; ++a) {
          const auto bus = static_cast<Eigen::Index>(used[c][static_cast<std::size_t>(a)]);
          const std::string b = std::to_string(bus + 1);
          cols.emplace_back("theta" + b + "_true", s.truth.states.col(bus));
          cols.emplace_back("theta" + b + "_mean", nt.mean.col(a));
          cols.emplace_back("theta" + b + "_std", nt.var.col(a).cwiseMax(0.0).cwiseSqrt());
          cols.emplace_back("omega" + b + "_true", s.truth.states.col(N + bus));
          cols.emplace_back("omega" + b + "_mean", nt.mean.col(m + a));
          cols.emplace_back("omega" + b + "_std", nt.var.col(m + a).cwiseMax(0.0).cwiseSqrt());
        }
      }
      // Stable bus order in the CSV.
      std::vector<std::pair<std::string, Vector>> sorted;
      for (Eigen::Index b = 0; b < N; ++b) {
        const std::string id = std::to_string(b + 1);
        for (const char* q : {"theta", "omega"})
          for (const char* k : {"_true", "_mean", "_std"}) {
            const std::string want = std::string(q) + id + k;
            for (const auto& c : cols)
              if (c.first == want) sorted.push_back(c);
          }
      }
      rep.trajectories.push_back(make_trajectory(method, tr.t, sorted));
      rep.results["partition"] = {{"clusters", cluster_json(s.partition)},
                                  {"n_clusters", s.partition.size()},
                                  {"avg_size", static_cast<double>(s.km.size()) / static_cast<double>(s.partition.size())}};
      rep.results["n_bus"] = s.km.size();
      rep.hashes[fs::path(path).filename().string()] = s.hash;
    }
  }
  rep.results["replicates"] = reps;
  rep.results["summary"] = summarize(reps, {method},
                                     {"theta_nrmse", "theta_rmse", "omega_nrmse", "omega_coverage95", "seconds"});
  if (reps[0]["methods"][method].contains("natural_coverage95"))
    rep.results["summary"][method]["natural_coverage95"] =
        summarize(reps, {method}, {"natural_coverage95"})[method]["natural_coverage95"];
  return rep;
}

std::vector<fs::path> case_files(const std::string& data_dir) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(data_dir, ec)) return out;
  for (const auto& e : fs::directory_iterator(data_dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".m") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void register_grid_scenarios(std::vector<ScenarioInfo>& out, const std::string& data_dir) {
  const auto files = case_files(data_dir);
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    const std::string path = f.string();
    for (const auto& m : kGridMethods) {
      out.push_back({"grid-" + stem + "-" + m, "Kuramoto joint estimation on " + stem + " (" + m + ")", grid_defaults(),
                     [path, m](const RunConfig& cfg, const json& p) { return run_grid(path, m, cfg, p); }});
    }
  }
  json sd = grid_defaults();
  sd["cases"] = json::array();
  for (const auto& f : files) sd["cases"].push_back(f.stem().string());
  sd["repeats"] = 3;
  sd["methods"] = {"centralized", "distributed"};
  out.push_back({"grid-scaling", "grid estimator runtime against bus count", sd,
                 [data_dir](const RunConfig& cfg, const json& p) {
                   ExperimentReport rep;
                   const auto cases = p.at("cases").get<std::vector<std::string>>();
                   const auto methods = p.at("methods").get<std::vector<std::string>>();
                   const int repeats = integer(p, "repeats");
                   json mj = json::object();
                   for (const auto& m : methods) {
                     std::vector<double> sizes, secs;
                     json pts = json::array();
                     for (const auto& c : cases) {
                       const std::string path = (fs::path(data_dir) / (c + ".m")).string();
                       const GridSetup s = grid_setup(path, p, p.at("seed").get<std::uint64_t>());
                       rep.hashes[c + ".m"] = s.hash;
                       std::vector<double> samples;
                       for (int r = 0; r < repeats; ++r)
                         samples.push_back(grid_method(s, p, m, 1, nullptr, nullptr).at("seconds").get<double>());
                       const double med = median(samples);
                       sizes.push_back(static_cast<double>(s.km.size()));
                       secs.push_back(med);
                       pts.push_back({{"case", c}, {"n_bus", s.km.size()}, {"seconds", med}, {"samples", samples}});
                     }
                     mj[m]["points"] = pts;
                     if (sizes.size() >= 2) mj[m]["slope"] = loglog_slope(sizes, secs);
                   }
                   (void)cfg;
                   rep.results["methods"] = mj;
                   return rep;
                 }});
}

}  // namespace coinfer::cli
