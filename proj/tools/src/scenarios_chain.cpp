#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "scenario_util.hpp"

namespace coinfer::cli {

using namespace detail;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct ChainData {
  TruthRun truth;
  Matrix forcing;  // steps x n
  MeasurementSet dist;
  MeasurementSet cen;
  std::vector<double> t;
};

ChainData simulate_chain(const ChainSystem& sys, const Vector& z0, long steps, IntegratorKind integ,
                         const Matrix& forcing, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(sys.params.n_dof());
  const auto params = sys.params;
  const auto measured = sys.centralized_measured;
  const Measurement h = [params, measured, n](const Vector& z, const Vector& u) {
    const Vector a = chain_accelerations(params, z.head(n), z.tail(n), u);
    Vector y(static_cast<Eigen::Index>(measured.size()));
    for (std::size_t k = 0; k < measured.size(); ++k) y(static_cast<Eigen::Index>(k)) = a(measured[k]);
    return y;
  };
  Vector sd(static_cast<Eigen::Index>(measured.size()));
  Eigen::Index k = 0;
  for (const auto& p : sys.parts)
    for (double v : p.meas_var) sd(k++) = std::sqrt(v);
  Rng rng(seed);
  ChainData d;
  d.forcing = forcing;
  d.truth = simulate_truth(sys.truth_derivative, h, z0, steps, sys.spec.dt, integ, forcing, sd, rng);
  for (long i = 0; i <= steps; ++i) d.t.push_back(static_cast<double>(i) * sys.spec.dt);
  Eigen::Index off = 0;
  for (std::size_t s = 0; s < sys.parts.size(); ++s) {
    const auto& p = sys.parts[s];
    const auto no = static_cast<Eigen::Index>(p.measured_dofs.size());
    NodeSeries ns;
    ns.measurements = d.truth.measurements.middleCols(off, no);
    ns.exogenous.resize(steps, static_cast<Eigen::Index>(p.dofs.size()));
    for (std::size_t j = 0; j < p.dofs.size(); ++j)
      ns.exogenous.col(static_cast<Eigen::Index>(j)) = forcing.col(static_cast<Eigen::Index>(p.dofs[j]));
    d.dist[static_cast<int>(s)] = std::move(ns);
    off += no;
  }
  d.cen[0] = NodeSeries{d.truth.measurements, forcing};
  return d;
}

std::size_t total_unknowns(const ChainSystem& sys) {
  std::size_t np = 0;
  for (const auto& p : sys.parts) np += p.unknowns.size();
  return np;
}

// Distributed trace in the centralized layout [x, v, params].
void assemble(const ChainSystem& sys, const RunTrace& tr, Matrix& mean, Matrix& var) {
  const auto n = static_cast<Eigen::Index>(sys.params.n_dof());
  const auto dim = 2 * n + static_cast<Eigen::Index>(total_unknowns(sys));
  const auto rows = static_cast<Eigen::Index>(tr.t.size());
  mean.resize(rows, dim);
  var.resize(rows, dim);
  Eigen::Index poff = 2 * n;
  for (std::size_t s = 0; s < sys.parts.size(); ++s) {
    const auto& p = sys.parts[s];
    const auto& nt = tr.node(static_cast<int>(s));
    const auto m = static_cast<Eigen::Index>(p.dofs.size());
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto g = static_cast<Eigen::Index>(p.dofs[static_cast<std::size_t>(j)]);
      mean.col(g) = nt.mean.col(j);
      var.col(g) = nt.var.col(j);
      mean.col(n + g) = nt.mean.col(m + j);
      var.col(n + g) = nt.var.col(m + j);
    }
    for (std::size_t u = 0; u < p.unknowns.size(); ++u) {
      const auto ui = static_cast<Eigen::Index>(u);
      mean.col(poff + ui) = nt.mean.col(2 * m + ui);
      var.col(poff + ui) = nt.var.col(2 * m + ui);
    }
    poff += static_cast<Eigen::Index>(p.unknowns.size());
  }
}

double true_value(const ChainParams& p, const ChainUnknown& u) {
  switch (u.kind) {
    case ChainParamKind::LinkK: return p.k_link.at(u.index);
    case ChainParamKind::LinkC: return p.c_link.at(u.index);
    case ChainParamKind::GroundK: return p.k_ground.at(u.index);
    case ChainParamKind::GroundC: return p.c_ground.at(u.index);
    case ChainParamKind::AddedMass: return p.added_mass.empty() ? 0.0 : p.added_mass.at(u.index);
  }
  return 0.0;
}

std::vector<ChainUnknown> all_unknowns(const ChainSystem& sys) {
  std::vector<ChainUnknown> out;
  for (const auto& p : sys.parts) out.insert(out.end(), p.unknowns.begin(), p.unknowns.end());
  return out;
}

// Truth states with constant normalized parameter columns appended.
Matrix truth_with_params(const ChainSystem& sys, const Matrix& states) {
  const auto uks = all_unknowns(sys);
  Matrix t(states.rows(), states.cols() + static_cast<Eigen::Index>(uks.size()));
  t.leftCols(states.cols()) = states;
  for (std::size_t u = 0; u < uks.size(); ++u)
    t.col(states.cols() + static_cast<Eigen::Index>(u)).setConstant(true_value(sys.params, uks[u]) / uks[u].scale);
  return t;
}

struct MethodRun {
  Matrix mean, var;
  RunTrace trace;
};

MethodRun run_centralized(const ChainSystem& sys, const ChainData& d, const ScheduleConfig& sc) {
  ScheduleConfig c = sc;
  c.kind = ScheduleKind::Jacobi;
  c.threads = 1;
  c.gs_order.clear();
  const auto g = build_graph({sys.centralized_node(0)}, {});
  MethodRun r;
  r.trace = run_schedule(g, c, d.cen);
  r.mean = r.trace.node(0).mean;
  r.var = r.trace.node(0).var;
  return r;
}

MethodRun run_distributed(const ChainSystem& sys, const ChainData& d, const ScheduleConfig& sc) {
  MethodRun r;
  r.trace = run_schedule(sys.graph(), sc, d.dist);
  assemble(sys, r.trace, r.mean, r.var);
  return r;
}

std::vector<std::string> chain_channel_names(const ChainSystem& sys, const std::vector<std::string>& param_names) {
  std::vector<std::string> out;
  const std::size_t n = sys.params.n_dof();
  for (std::size_t i = 0; i < n; ++i) out.push_back("x" + std::to_string(i + 1));
  for (std::size_t i = 0; i < n; ++i) out.push_back("v" + std::to_string(i + 1));
  for (const auto& p : param_names) out.push_back(p);
  return out;
}

// Parameter columns back in physical units.
Trajectory chain_trajectory(const std::string& name, const ChainSystem& sys, const ChainData& d, const Matrix& truth,
                            const MethodRun& r, const std::vector<std::string>& param_names) {
  const auto uks = all_unknowns(sys);
  const auto n2 = static_cast<Eigen::Index>(2 * sys.params.n_dof());
  Matrix t = truth, m = r.mean, v = r.var;
  for (std::size_t u = 0; u < uks.size(); ++u) {
    const auto c = n2 + static_cast<Eigen::Index>(u);
    t.col(c) *= uks[u].scale;
    m.col(c) *= uks[u].scale;
    v.col(c) *= uks[u].scale * uks[u].scale;
  }
  return belief_trajectory(name, d.t, chain_channel_names(sys, param_names), t, m, v);
}

ScheduleConfig schedule_from(const json& p, const RunConfig& cfg, double horizon, double dt) {
  ScheduleConfig sc;
  sc.kind = schedule_from_string(str(p, "schedule"));
  sc.inner_iterations = integer(p, "inner_iterations");
  sc.horizon = horizon;
  sc.dt = dt;
  sc.threads = cfg.threads;
  sc.injection = injection_from_string(str(p, "injection"));
  return sc;
}

// ---------------------------------------------------------------- chain4

ChainParams chain4_params(const json& p) { return uniform_chain(4, num(p, "mass"), num(p, "k"), num(p, "c")); }

ChainSystem chain4_system(const json& p, MessageMode mode, EstimatorKind est, std::optional<LearnedLaw> law = {}) {
  const double var = num(p, "sigma_a") * num(p, "sigma_a");
  ChainSubsystemSpec a{{0, 1}, {0}, {var}, {}};
  ChainUnknown k4{ChainParamKind::LinkK, 2, num(p, "k4_initial"), num(p, "k4_scale"), num(p, "k4_prior_var")};
  ChainSubsystemSpec b{{2, 3}, {3}, {var}, {k4}};
  ChainFilterSpec spec;
  spec.estimator = est;
  spec.mode = mode;
  spec.integrator = integrator_from_string(str(p, "integrator"));
  spec.dt = num(p, "dt");
  spec.qx = num(p, "qx");
  spec.qv = num(p, "qv");
  spec.qp = num(p, "qp");
  spec.p0_x = num(p, "p0_state");
  spec.p0_v = num(p, "p0_state");
  spec.x0 = Vector::Zero(4);
  spec.v0 = Vector::Zero(4);
  spec.x0(0) = num(p, "x1_0");
  spec.v0(0) = num(p, "v1_0");
  spec.ukf = ukf_from_json(p.at("ukf"));
  spec.learned = law;
  return build_chain(chain4_params(p), {a, b}, spec);
}

json chain4_defaults() {
  return {{"seed", 0},
          {"replicates", 1},
          {"horizon", 10.0},
          {"dt", 1e-3},
          {"mass", 500.0},
          {"k", 5e4},
          {"c", 300.0},
          {"x1_0", 0.01},
          {"v1_0", 0.01},
          {"sigma_a", 0.01},
          {"k4_initial", 3e4},
          {"k4_scale", 5e4},
          {"k4_prior_var", 0.04},
          {"p0_state", 1e-6},
          {"qx", 1e-14},
          {"qv", 1e-12},
          {"qp", 1e-9},
          {"integrator", "euler"},
          {"truth_integrator", "euler"},
          {"schedule", "jacobi"},
          {"inner_iterations", 1},
          {"injection", "incremental"},
          {"burn_in", 0.2},
          {"ukf", {{"alpha", 1.0}, {"beta", 2.0}, {"kappa", 0.0}}},
          {"methods", json::array({"centralized", "det"})},
          {"sindy",
           {{"horizon", 10.0},
            {"sigma", 0.01},
            {"cutoff_hz", 0.5},
            {"threshold", 1.0},
            {"max_iters", 20},
            {"normalize_columns", true},
            {"consistent_filtering", true},
            {"truth_integrator", "heun"},
            {"seed_offset", 1000}}}};
}

struct SindyOutcome {
  LearnedLaw law;
  double k_rel = 0.0, c_rel = 0.0;
};

SindyOutcome fit_chain4_law(const json& p, std::uint64_t seed) {
  const json& s = p.at("sindy");
  const ChainParams cp = chain4_params(p);
  const double dt = num(p, "dt");
  const long steps = std::lround(num(s, "horizon") / dt);
  ChainSubsystemSpec all{{0, 1, 2, 3}, {1, 2}, {num(s, "sigma") * num(s, "sigma"), num(s, "sigma") * num(s, "sigma")}, {}};
  ChainFilterSpec spec;
  spec.estimator = EstimatorKind::DeterministicPropagate;
  spec.dt = dt;
  const ChainSystem sys = build_chain(cp, {all}, spec);
  Vector z0 = Vector::Zero(8);
  z0(0) = num(p, "x1_0");
  z0(4) = num(p, "v1_0");
  const ChainData d = simulate_chain(sys, z0, steps, integrator_from_string(str(s, "truth_integrator")),
                                     Matrix::Zero(steps, 4), seed + s.at("seed_offset").get<std::uint64_t>());
  // The recorder also samples t = 0, which the filter series leaves out.
  const Matrix& st = d.truth.states;
  const Vector force = cp.k_link[1] * (st.col(1) - st.col(2)) + cp.c_link[1] * (st.col(5) - st.col(6));
  Rng r0 = Rng(seed + s.at("seed_offset").get<std::uint64_t>()).fork(1);
  const Vector a0 = chain_accelerations(cp, z0.head(4), z0.tail(4), Vector::Zero(4));
  Matrix acc(steps + 1, 2);
  acc(0, 0) = a0(1) + num(s, "sigma") * r0.normal();
  acc(0, 1) = a0(2) + num(s, "sigma") * r0.normal();
  acc.bottomRows(steps) = d.truth.measurements;
  SindyConfig sc;
  sc.threshold = num(s, "threshold");
  sc.max_iters = integer(s, "max_iters");
  sc.normalize_columns = s.at("normalize_columns").get<bool>();
  sc.highpass_cutoff = num(s, "cutoff_hz");
  sc.consistent_filtering = s.at("consistent_filtering").get<bool>();
  sc.dt = dt;
  SindyOutcome out;
  out.law = fit_interface_law(acc.col(0), acc.col(1), force, sc);
  out.k_rel = std::abs(out.law.xi[0] / cp.k_link[1] - 1.0);
  out.c_rel = std::abs(out.law.xi[1] / cp.c_link[1] - 1.0);
  return out;
}

ExperimentReport run_chain4_inverse(const RunConfig& cfg, const json& p) {
  const double dt = num(p, "dt");
  const double horizon = num(p, "horizon");
  const long steps = std::lround(horizon / dt);
  const auto methods = p.at("methods").get<std::vector<std::string>>();
  for (const auto& m : methods)
    if (m != "centralized" && m != "det" && m != "prob" && m != "learned")
      fail(ErrorKind::ConfigInvalid, "unknown method '" + m + "' (centralized, det, prob, learned)");
  const ScheduleConfig sc = schedule_from(p, cfg, horizon, dt);
  const std::vector<Eigen::Index> hidden{1, 2, 5, 6};
  std::vector<Eigen::Index> states8(8);
  for (Eigen::Index i = 0; i < 8; ++i) states8[static_cast<std::size_t>(i)] = i;
  const auto burn = static_cast<Eigen::Index>(num(p, "burn_in") * static_cast<double>(steps));
  const double k4_true = chain4_params(p).k_link[2];
  const double k4_scale = num(p, "k4_scale");

  ExperimentReport rep;
  json reps = json::array();
  const auto seeds = replicate_seeds(p);
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const ChainSystem base = chain4_system(p, MessageMode::Deterministic, EstimatorKind::UKF);
    Vector z0 = Vector::Zero(8);
    z0(0) = num(p, "x1_0");
    z0(4) = num(p, "v1_0");
    const ChainData d = simulate_chain(base, z0, steps, integrator_from_string(str(p, "truth_integrator")),
                                       Matrix::Zero(steps, 4), seeds[r]);
    const Matrix truth = truth_with_params(base, d.truth.states);
    json rj;
    rj["seed"] = seeds[r];
    for (const auto& m : methods) {
      MethodRun run;
      json mj;
      if (m == "centralized") {
        run = run_centralized(base, d, sc);
      } else if (m == "det") {
        run = run_distributed(base, d, sc);
      } else if (m == "prob") {
        run = run_distributed(chain4_system(p, MessageMode::Probabilistic, EstimatorKind::UKF), d, sc);
      } else {
        const SindyOutcome so = fit_chain4_law(p, seeds[r]);
        mj["learned_xi"] = std::vector<double>(so.law.xi.begin(), so.law.xi.end());
        mj["k_rel_error"] = so.k_rel;
        mj["c_rel_error"] = so.c_rel;
        run = run_distributed(chain4_system(p, MessageMode::Learned, EstimatorKind::UKF, so.law), d, sc);
        if (r == 0) {
          std::ostringstream os;
          write_learned_law(os, so.law);
          rep.files.emplace_back("learned_law.txt", os.str());
        }
      }
      const auto hm = channel_metrics(truth, run.mean, run.var, hidden, burn);
      const auto sm = channel_metrics(truth, run.mean, run.var, states8, burn);
      const double k4 = run.mean(run.mean.rows() - 1, 8) * k4_scale;
      mj["rmse_hidden"] = hm.rmse;
      mj["coverage95"] = hm.cov95;
      mj["coverage68"] = hm.cov68;
      mj["nll"] = hm.nll;
      mj["rmse_states"] = sm.rmse;
      mj["coverage95_states"] = sm.cov95;
      mj["k4_final"] = k4;
      mj["k4_rel_error"] = std::abs(k4 / k4_true - 1.0);
      mj["seconds"] = run.trace.total_seconds;
      rj["methods"][m] = mj;
      if (r == 0) rep.trajectories.push_back(chain_trajectory(m + "_states", base, d, truth, run, {"k4"}));
    }
    reps.push_back(rj);
  }
  rep.results["replicates"] = reps;
  rep.results["summary"] = summarize(reps, methods,
                                     {"rmse_hidden", "rmse_states", "coverage95", "coverage68", "nll", "k4_final",
                                      "k4_rel_error", "seconds"});
  if (std::find(methods.begin(), methods.end(), "det") != methods.end() &&
      std::find(methods.begin(), methods.end(), "prob") != methods.end()) {
    int wins = 0;
    for (const auto& r : reps)
      if (r["methods"]["prob"]["coverage95"].get<double>() > r["methods"]["det"]["coverage95"].get<double>()) ++wins;
    rep.results["prob_coverage_wins"] = wins;
  }
  rep.results["k4_true"] = k4_true;
  rep.results["hidden_channels"] = {"x2", "x3", "v2", "v3"};
  return rep;
}

ExperimentReport run_chain4_forward(const RunConfig& cfg, const json& p) {
  const double dt = num(p, "dt");
  const double horizon = num(p, "horizon");
  const long steps = std::lround(horizon / dt);
  const ChainParams cp = chain4_params(p);
  ChainFilterSpec spec;
  spec.estimator = EstimatorKind::DeterministicPropagate;
  spec.integrator = integrator_from_string(str(p, "integrator"));
  spec.dt = dt;
  spec.x0 = Vector::Zero(4);
  spec.v0 = Vector::Zero(4);
  spec.x0(0) = num(p, "x1_0");
  spec.v0(0) = num(p, "v1_0");
  const ChainSystem sys = build_chain(cp, {{{0, 1}, {}, {}, {}}, {{2, 3}, {}, {}, {}}}, spec);
  Vector z0(8);
  z0 << spec.x0, spec.v0;
  const auto t0 = Clock::now();
  const ChainData ref = simulate_chain(sys, z0, steps, integrator_from_string(str(p, "reference_integrator")),
                                       Matrix::Zero(steps, 4), 0);
  const double ref_seconds = seconds_since(t0);

  ExperimentReport rep;
  json methods = json::object();
  methods["monolithic"] = {{"seconds", ref_seconds}};
  std::vector<std::pair<std::string, Vector>> cols;
  for (int j = 0; j < 4; ++j) cols.emplace_back("x" + std::to_string(j + 1) + "_ref", ref.truth.states.col(j));
  for (const auto& name : p.at("schedules").get<std::vector<std::string>>()) {
    ScheduleConfig sc;
    sc.kind = schedule_from_string(name);
    sc.horizon = horizon;
    sc.dt = dt;
    sc.threads = cfg.threads;
    sc.inner_iterations = integer(p, "inner_iterations");
    sc.gs_order = {0, 1};
    MethodRun run = run_distributed(sys, ref, sc);
    const Matrix err = (run.mean.leftCols(4) - ref.truth.states.leftCols(4)).cwiseAbs();
    std::vector<double> med, mx;
    for (int j = 0; j < 4; ++j) {
      const Vector c = err.col(j);
      med.push_back(median(std::vector<double>(c.data(), c.data() + c.size())));
      mx.push_back(c.maxCoeff());
    }
    methods[name] = {{"median_abs_error", med}, {"max_abs_error", mx}, {"seconds", run.trace.total_seconds}};
    for (int j = 0; j < 4; ++j) cols.emplace_back("x" + std::to_string(j + 1) + "_" + name, run.mean.col(j));
  }
  rep.results["methods"] = methods;
  rep.trajectories.push_back(make_trajectory("displacements", ref.t, cols));
  return rep;
}

// ---------------------------------------------------------------- chain6

struct Chain6 {
  ChainSystem sys;
  std::vector<std::string> param_names;
};

ChainParams chain6_params(const json& p) {
  const double m = num(p, "mass"), k = num(p, "k"), c = num(p, "c");
  ChainParams cp;
  cp.mass.assign(6, m);
  cp.added_mass.assign(6, 0.0);
  cp.added_mass[2] = num(p, "m_star");
  cp.k_link.assign(5, k);
  cp.c_link.assign(5, c);
  cp.k_link[2] = num(p, "k_star");
  cp.k_ground = {k, k, 0.0, k, k, 0.0};
  cp.c_ground = {c, c, 0.0, c, c, 0.0};
  return cp;
}

Chain6 chain6_system(const json& p, MessageMode mode) {
  const ChainParams cp = chain6_params(p);
  const double f = num(p, "initial_fraction");
  const double pv = num(p, "param_prior_var");
  auto uk = [&](ChainParamKind kind, std::size_t idx, double truth) {
    return ChainUnknown{kind, idx, f * truth, f * truth, pv};
  };
  ChainSubsystemSpec v1{{0, 1}, {1}, {num(p, "var_v1")},
                        {uk(ChainParamKind::LinkK, 0, cp.k_link[0]), uk(ChainParamKind::LinkC, 0, cp.c_link[0])}};
  ChainSubsystemSpec v3{{2, 3}, {2, 3}, {num(p, "var_v3"), num(p, "var_v3")},
                        {uk(ChainParamKind::AddedMass, 2, cp.added_mass[2]), uk(ChainParamKind::GroundK, 3, cp.k_ground[3]),
                         uk(ChainParamKind::GroundC, 3, cp.c_ground[3]), uk(ChainParamKind::LinkK, 2, cp.k_link[2])}};
  ChainSubsystemSpec v2{{4, 5}, {4}, {num(p, "var_v2")},
                        {uk(ChainParamKind::LinkK, 4, cp.k_link[4]), uk(ChainParamKind::LinkC, 4, cp.c_link[4])}};
  ChainFilterSpec spec;
  spec.estimator = EstimatorKind::UKF;
  spec.mode = mode;
  spec.integrator = integrator_from_string(str(p, "integrator"));
  spec.dt = num(p, "dt");
  spec.qx = num(p, "qx");
  spec.qv = num(p, "qv");
  spec.qp = num(p, "qp");
  spec.p0_x = num(p, "p0_state");
  spec.p0_v = num(p, "p0_state");
  spec.ukf = ukf_from_json(p.at("ukf"));
  return {build_chain(cp, {v1, v3, v2}, spec), {"k3", "c3", "m_star", "k6", "c6", "k_star", "k9", "c9"}};
}

Matrix chain6_forcing(const json& p, long steps) {
  Matrix f = Matrix::Zero(steps, 6);
  const auto amp = p.at("forcing_amplitudes").get<std::vector<double>>();
  const auto hz = p.at("forcing_hz").get<std::vector<double>>();
  if (amp.size() != hz.size()) fail(ErrorKind::ConfigInvalid, "forcing_amplitudes and forcing_hz differ in length");
  const double dt = num(p, "dt");
  const auto dof = static_cast<Eigen::Index>(integer(p, "forcing_dof"));
  if (dof < 0 || dof >= 6) fail(ErrorKind::ConfigInvalid, "forcing_dof out of range");
  for (long n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    double v = 0.0;
    for (std::size_t i = 0; i < amp.size(); ++i) v += amp[i] * std::sin(2.0 * M_PI * hz[i] * t);
    f(n, dof) = v;
  }
  return f;
}

json chain6_defaults() {
  return {{"seed", 0},
          {"replicates", 1},
          {"horizon", 10.0},
          {"dt", 2e-3},
          {"mass", 500.0},
          {"m_star", 100.0},
          {"k", 5e4},
          {"c", 300.0},
          {"k_star", 5e4},
          {"forcing_dof", 3},
          {"forcing_amplitudes", {100.0, 50.0}},
          {"forcing_hz", {1.5, 3.7}},
          {"var_v1", 1e-3},
          {"var_v3", 1e-2},
          {"var_v2", 1e-3},
          {"initial_fraction", 0.7},
          {"param_prior_var", 0.25},
          {"p0_state", 1e-6},
          {"qx", 1e-14},
          {"qv", 1e-12},
          {"qp", 1e-9},
          {"integrator", "heun"},
          {"truth_integrator", "heun"},
          {"schedule", "jacobi"},
          {"inner_iterations", 1},
          {"injection", "incremental"},
          {"burn_in", 0.2},
          {"ukf", {{"alpha", 1.0}, {"beta", 2.0}, {"kappa", 0.0}}},
          {"methods", json::array({"centralized", "det", "prob"})}};
}

json param_errors(const ChainSystem& sys, const Matrix& mean, const std::vector<std::string>& names) {
  const auto uks = all_unknowns(sys);
  const auto n2 = static_cast<Eigen::Index>(2 * sys.params.n_dof());
  json j = json::object();
  for (std::size_t u = 0; u < uks.size(); ++u) {
    const double est = mean(mean.rows() - 1, n2 + static_cast<Eigen::Index>(u)) * uks[u].scale;
    const double tv = true_value(sys.params, uks[u]);
    j[names[u]] = {{"final", est}, {"truth", tv}, {"rel_error", std::abs(est / tv - 1.0)}};
  }
  return j;
}

ExperimentReport run_chain6_inverse(const RunConfig& cfg, const json& p) {
  const double dt = num(p, "dt"), horizon = num(p, "horizon");
  const long steps = std::lround(horizon / dt);
  const auto methods = p.at("methods").get<std::vector<std::string>>();
  const ScheduleConfig sc = schedule_from(p, cfg, horizon, dt);
  const auto burn = static_cast<Eigen::Index>(num(p, "burn_in") * static_cast<double>(steps));
  std::vector<Eigen::Index> states(12);
  for (Eigen::Index i = 0; i < 12; ++i) states[static_cast<std::size_t>(i)] = i;
  ExperimentReport rep;
  json reps = json::array();
  const auto seeds = replicate_seeds(p);
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const Chain6 base = chain6_system(p, MessageMode::Deterministic);
    const ChainData d = simulate_chain(base.sys, Vector::Zero(12), steps,
                                       integrator_from_string(str(p, "truth_integrator")), chain6_forcing(p, steps),
                                       seeds[r]);
    const Matrix truth = truth_with_params(base.sys, d.truth.states);
    json rj;
    rj["seed"] = seeds[r];
    for (const auto& m : methods) {
      MethodRun run;
      if (m == "centralized") run = run_centralized(base.sys, d, sc);
      else if (m == "det") run = run_distributed(base.sys, d, sc);
      else if (m == "prob") run = run_distributed(chain6_system(p, MessageMode::Probabilistic).sys, d, sc);
      else fail(ErrorKind::ConfigInvalid, "unknown method '" + m + "' (centralized, det, prob)");
      const auto sm = channel_metrics(truth, run.mean, run.var, states, burn);
      json mj = {{"rmse_states", sm.rmse}, {"coverage95", sm.cov95}, {"coverage68", sm.cov68}, {"nll", sm.nll},
                 {"seconds", run.trace.total_seconds}};
      mj["parameters"] = param_errors(base.sys, run.mean, base.param_names);
      rj["methods"][m] = mj;
      if (r == 0) rep.trajectories.push_back(chain_trajectory(m + "_states", base.sys, d, truth, run, base.param_names));
    }
    reps.push_back(rj);
  }
  rep.results["replicates"] = reps;
  rep.results["summary"] = summarize(reps, methods, {"rmse_states", "coverage95", "coverage68", "nll", "seconds"});
  return rep;
}

std::size_t edge_by_label(const SystemGraph& g, const std::string& label) {
  for (std::size_t e = 0; e < g.edges().size(); ++e)
    if (g.edges()[e].label == label) return e;
  fail(ErrorKind::DanglingEdge, "no edge labelled " + label);
}

json envelope_json(const Envelope& e) {
  const Vector w = e.upper - e.lower;
  return {{"mean_width", w.mean()}, {"max_width", w.maxCoeff()}};
}

ExperimentReport run_chain6_diffusion(const RunConfig& cfg, const json& p) {
  const double dt = num(p, "dt"), horizon = num(p, "horizon");
  const long steps = std::lround(horizon / dt);
  const ScheduleConfig sc = schedule_from(p, cfg, horizon, dt);
  const MessageMode mode = str(p, "baseline_mode") == "prob" ? MessageMode::Probabilistic : MessageMode::Deterministic;
  const Chain6 c6 = chain6_system(p, mode);
  const Matrix forcing = chain6_forcing(p, steps);
  const ChainData d = simulate_chain(c6.sys, Vector::Zero(12), steps, integrator_from_string(str(p, "truth_integrator")),
                                     forcing, p.at("seed").get<std::uint64_t>());
  const SystemGraph g = c6.sys.graph();
  const RunTrace base = run_schedule(g, sc, d.dist);

  const double alpha = num(p, "alpha"), beta = num(p, "beta");
  const double k_star = num(p, "k_star"), m_star = num(p, "m_star");
  const std::size_t e13 = edge_by_label(g, "link2");   // V1 -> V3
  const std::size_t e23 = edge_by_label(g, "link4r");  // V2 -> V3
  const auto& v1 = base.node(0);
  const auto& v3 = base.node(1);
  const auto& v2 = base.node(2);
  const auto& v3_model = g.node(1).model;

  struct DefectOut {
    std::string name;
    DefectSignal ds;
    Vector s1, s3, s2;
    Matrix hk;
    Envelope env1, env6, hk1, hk6;
  };
  struct PassOut {
    EdgeAffinities aff;
    Vector base1, base6;
    std::vector<DefectOut> defects;
  };
  // Sensitivity pass, reusing the baseline trace only.
  auto pass = [&]() {
    PassOut o;
    const Vector f13 = base.messages.col(static_cast<Eigen::Index>(e13));
    const Vector f23 = base.messages.col(static_cast<Eigen::Index>(e23));
    o.aff = edge_weights_from_rms({f13, f23});
    const DiffusionGraph dg = DiffusionGraph::from_edges(3, {{0, 1}, {1, 2}}, o.aff.eta);
    // Rows 1..steps align with the messages of steps 0..steps-1.
    const Vector x3 = v3.mean.col(0).tail(steps), x4 = v3.mean.col(1).tail(steps);
    const Matrix v3t = v3.mean.transpose();
    Vector a3(steps), u(2), z(v3t.rows());
    for (long n = 0; n < steps; ++n) {
      u << f13(n), f23(n) + forcing(n, 3);
      z = v3t.col(n + 1);
      a3(n) = v3_model.derivative(z, u)(2);
    }
    const Vector sig1 = v1.var.col(0).tail(steps).cwiseMax(0.0).cwiseSqrt();
    const Vector sig6 = v2.var.col(1).tail(steps).cwiseMax(0.0).cwiseSqrt();
    o.base1 = v1.mean.col(0).tail(steps);
    o.base6 = v2.mean.col(1).tail(steps);
    const std::vector<std::pair<std::string, Vector>> defects{
        {"stiffness", defect_force_stiffness(k_star, x3, x4)}, {"mass", defect_force_mass(m_star, a3)}};
    for (const auto& [name, signed_defect] : defects) {
      DefectOut d;
      d.name = name;
      d.ds = make_defect(1, signed_defect);
      // Scores are linear in q: one unit split scales the whole series.
      const OneHopScores unit = one_hop_scores(1.0, alpha, o.aff.eta);
      d.s3 = unit.source * d.ds.magnitude;
      d.s1 = unit.neighbors[0] * d.ds.magnitude;
      d.s2 = unit.neighbors[1] * d.ds.magnitude;
      d.hk = heat_kernel_scores_series(dg, beta, d.ds);
      d.env1 = sensitivity_envelope(o.base1, d.s1, sig1);
      d.env6 = sensitivity_envelope(o.base6, d.s2, sig6);
      d.hk1 = sensitivity_envelope(o.base1, Vector(d.hk.row(0).transpose()), sig1);
      d.hk6 = sensitivity_envelope(o.base6, Vector(d.hk.row(2).transpose()), sig6);
      o.defects.push_back(std::move(d));
    }
    return o;
  };
  std::vector<double> pass_times;
  PassOut po;
  for (int r = 0; r < integer(p, "timing_repeats"); ++r) {
    const auto t0 = Clock::now();
    po = pass();
    pass_times.push_back(seconds_since(t0));
  }
  const double pass_seconds = median(pass_times);
  const EdgeAffinities& aff = po.aff;

  json dj = json::object();
  double max_onehop_err = 0.0, max_mass_err = 0.0;
  std::vector<std::pair<std::string, Vector>> cols;
  for (const auto& d : po.defects) {
    max_onehop_err = std::max(max_onehop_err, (d.s1 + d.s2 + d.s3 - d.ds.magnitude).cwiseAbs().maxCoeff());
    max_mass_err = std::max(max_mass_err, (d.hk.colwise().sum().transpose() - d.ds.magnitude).cwiseAbs().maxCoeff());
    dj[d.name] = {{"defect_rms", rms(d.ds.magnitude)},
                  {"one_hop_rms", {{"V1", rms(d.s1)}, {"V3", rms(d.s3)}, {"V2", rms(d.s2)}}},
                  {"heat_kernel_rms", {{"V1", rms(d.hk.row(0).transpose())}, {"V3", rms(d.hk.row(1).transpose())},
                                       {"V2", rms(d.hk.row(2).transpose())}}},
                  {"envelope_x1_one_hop", envelope_json(d.env1)},
                  {"envelope_x6_one_hop", envelope_json(d.env6)},
                  {"envelope_x1_heat", envelope_json(d.hk1)},
                  {"envelope_x6_heat", envelope_json(d.hk6)}};
    cols.emplace_back(d.name + "_x1_lower", d.env1.lower);
    cols.emplace_back(d.name + "_x1_upper", d.env1.upper);
    cols.emplace_back(d.name + "_x6_lower", d.env6.lower);
    cols.emplace_back(d.name + "_x6_upper", d.env6.upper);
  }
  const Vector& base1 = po.base1;
  const Vector& base6 = po.base6;

  ExperimentReport rep;
  rep.results["eta"] = {{"e13", aff.eta[0]}, {"e23", aff.eta[1]}};
  rep.results["rms_interface_force"] = {{"e13", aff.rms[0]}, {"e23", aff.rms[1]}};
  rep.results["uniform_fallback"] = aff.uniform_fallback;
  rep.results["defects"] = dj;
  rep.results["one_hop_conservation_error"] = max_onehop_err;
  rep.results["heat_kernel_mass_error"] = max_mass_err;
  rep.results["baseline_seconds"] = base.total_seconds;
  rep.results["sensitivity_seconds"] = pass_seconds;
  rep.results["speedup"] = base.total_seconds / std::max(pass_seconds, 1e-9);
  std::vector<double> t(d.t.begin() + 1, d.t.end());
  cols.insert(cols.begin(), {{"x1_base", base1}, {"x6_base", base6}});
  rep.trajectories.push_back(make_trajectory("envelopes", t, cols));
  return rep;
}

// ---------------------------------------------------------------- scaling

ChainSystem scaling_system(const json& p, std::size_t n) {
  const ChainParams cp = uniform_chain(n, num(p, "mass"), num(p, "k"), num(p, "c"));
  auto parts = pair_partition(n);
  const double var = num(p, "sigma_a") * num(p, "sigma_a");
  for (std::size_t s = 0; s < parts.size(); ++s) {
    auto& part = parts[s];
    part.measured_dofs = {part.dofs[1]};
    part.meas_var = {var};
    if (s > 0)
      part.unknowns = {ChainUnknown{ChainParamKind::LinkK, part.dofs[0], num(p, "initial_fraction") * cp.k_link[part.dofs[0]],
                                    cp.k_link[part.dofs[0]], num(p, "param_prior_var")}};
  }
  ChainFilterSpec spec;
  spec.estimator = EstimatorKind::UKF;
  spec.mode = MessageMode::Deterministic;
  spec.integrator = integrator_from_string(str(p, "integrator"));
  spec.dt = num(p, "dt");
  spec.qx = num(p, "qx");
  spec.qv = num(p, "qv");
  spec.qp = num(p, "qp");
  spec.p0_x = num(p, "p0_state");
  spec.p0_v = num(p, "p0_state");
  spec.ukf = ukf_from_json(p.at("ukf"));
  return build_chain(cp, parts, spec);
}

json scaling_defaults() {
  return {{"seed", 0},
          {"replicates", 1},
          {"sizes", {8, 16, 32, 64}},
          {"repeats", 3},
          {"horizon", 2.0},
          {"dt", 1e-3},
          {"mass", 500.0},
          {"k", 5e4},
          {"c", 300.0},
          {"force_std", 100.0},
          {"sigma_a", 0.01},
          {"initial_fraction", 0.8},
          {"param_prior_var", 0.04},
          {"p0_state", 1e-6},
          {"qx", 1e-14},
          {"qv", 1e-12},
          {"qp", 1e-9},
          {"integrator", "euler"},
          {"ukf", {{"alpha", 1.0}, {"beta", 2.0}, {"kappa", 0.0}}},
          {"methods", json::array({"centralized", "distributed"})}};
}

ExperimentReport run_chain_scaling(const RunConfig& cfg, const json& p) {
  const double dt = num(p, "dt"), horizon = num(p, "horizon");
  const long steps = std::lround(horizon / dt);
  const auto sizes = p.at("sizes").get<std::vector<int>>();
  const auto methods = p.at("methods").get<std::vector<std::string>>();
  const int repeats = integer(p, "repeats");
  const auto seed = p.at("seed").get<std::uint64_t>();
  struct Cached {
    ChainSystem sys;
    ChainData data;
  };
  std::map<std::size_t, Cached> cache;
  auto get = [&](std::size_t n) -> const Cached& {
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    ChainSystem sys = scaling_system(p, n);
    Rng frng(seed ^ splitmix64(n));
    Matrix forcing = Matrix::Zero(steps, static_cast<Eigen::Index>(n));
    for (long k = 0; k < steps; ++k) forcing(k, 0) = frng.normal(0.0, num(p, "force_std"));
    ChainData d = simulate_chain(sys, Vector::Zero(static_cast<Eigen::Index>(2 * n)), steps, IntegratorKind::Euler,
                                 forcing, seed + n);
    return cache.emplace(n, Cached{std::move(sys), std::move(d)}).first->second;
  };
  std::vector<double> xs(sizes.begin(), sizes.end());
  ExperimentReport rep;
  json mj = json::object();
  auto study = [&](const std::string& name, int threads) {
    const ScalingResult res = scaling_study(
        xs,
        [&](double size) {
          const auto& c = get(static_cast<std::size_t>(size));
          ScheduleConfig sc;
          sc.horizon = horizon;
          sc.dt = dt;
          sc.threads = threads;
          const MethodRun r = name == "centralized" ? run_centralized(c.sys, c.data, sc) : run_distributed(c.sys, c.data, sc);
          return r.trace.total_seconds;
        },
        repeats);
    json pts = json::array();
    for (const auto& pt : res.points) pts.push_back({{"dof", pt.size}, {"seconds", pt.seconds}, {"samples", pt.samples}});
    return json{{"points", pts}, {"slope", res.slope}, {"intercept", res.intercept}};
  };
  for (const auto& m : methods) {
    if (m != "centralized" && m != "distributed") fail(ErrorKind::ConfigInvalid, "unknown method '" + m + "'");
    mj[m] = study(m, 1);
  }
  if (cfg.threads > 1) mj["distributed_parallel"] = study("distributed", cfg.threads);
  rep.results["methods"] = mj;
  if (mj.contains("centralized") && mj.contains("distributed"))
    rep.results["slope_gap"] = mj["centralized"]["slope"].get<double>() - mj["distributed"]["slope"].get<double>();
  return rep;
}

// ---------------------------------------------------------------- hierarchy

json hierarchy_defaults() {
  return {{"seed", 0},
          {"replicates", 1},
          {"horizon", 5.0},
          {"dt", 1e-3},
          {"masses", {1.0, 1.5, 2.0}},
          {"k_link", {40.0, 30.0}},
          {"c_link", {0.4, 0.3}},
          {"k_ground", 20.0},
          {"c_ground", 0.2},
          {"x0", {0.1, 0.0, -0.05}},
          {"schedule", "jacobi"},
          {"inner_iterations", 1},
          {"tolerance", 1e-9}};
}

ExperimentReport run_hierarchy(const RunConfig& cfg, const json& p) {
  const double dt = num(p, "dt"), horizon = num(p, "horizon");
  const auto masses = p.at("masses").get<std::vector<double>>();
  const auto kl = p.at("k_link").get<std::vector<double>>();
  const auto cl = p.at("c_link").get<std::vector<double>>();
  const auto x0 = p.at("x0").get<std::vector<double>>();
  if (masses.size() != 3 || kl.size() != 2 || cl.size() != 2 || x0.size() != 3)
    fail(ErrorKind::ConfigInvalid, "hierarchy toy needs 3 masses, 2 links, 3 initial positions");
  ChainParams full;
  full.mass = masses;
  full.k_link = kl;
  full.c_link = cl;
  full.k_ground = {num(p, "k_ground"), 0.0, 0.0};
  full.c_ground = {num(p, "c_ground"), 0.0, 0.0};
  ChainFilterSpec spec;
  spec.estimator = EstimatorKind::DeterministicPropagate;
  spec.integrator = IntegratorKind::Heun;
  spec.dt = dt;
  spec.x0 = Eigen::Map<const Vector>(x0.data(), 3);
  spec.v0 = Vector::Zero(3);
  auto part = [](std::vector<std::size_t> d) { return ChainSubsystemSpec{std::move(d), {}, {}, {}}; };

  const ChainSystem flat = build_chain(full, {part({0}), part({1}), part({2})}, spec);
  const ChainSystem outer = build_chain(full, {part({0}), part({1, 2})}, spec);
  ChainParams inner_p;
  inner_p.mass = {masses[1], masses[2]};
  inner_p.k_link = {kl[1]};
  inner_p.c_link = {cl[1]};
  inner_p.k_ground = {0.0, 0.0};
  inner_p.c_ground = {0.0, 0.0};
  ChainFilterSpec ispec = spec;
  ispec.x0 = Vector(spec.x0.tail(2));
  ispec.v0 = Vector::Zero(2);
  ChainSystem inner = build_chain(inner_p, {part({0}), part({1})}, ispec);
  for (auto& n : inner.nodes) n.id += 10;
  for (auto& e : inner.edges) {
    e.sender += 10;
    e.receiver += 10;
  }
  BoundaryPort port;
  port.outer_states = {0, 2};
  port.inner_node = 10;
  port.inner_states = {0, 1};
  port.outer_input = 0;
  port.inner_input = 0;
  port.input_width = 1;
  const SystemGraph embedded = embed_subgraph(outer.graph(), 1, inner.graph(), {port});

  ScheduleConfig sc;
  sc.kind = schedule_from_string(str(p, "schedule"));
  sc.inner_iterations = integer(p, "inner_iterations");
  sc.horizon = horizon;
  sc.dt = dt;
  sc.threads = cfg.threads;
  const RunTrace tf = run_schedule(flat.graph(), sc, {});
  const RunTrace te = run_schedule(embedded, sc, {});
  const std::vector<std::pair<int, int>> pairs{{0, 0}, {1, 10}, {2, 11}};
  double max_diff = 0.0;
  bool bitwise = true;
  std::vector<std::pair<std::string, Vector>> cols;
  for (const auto& [a, b] : pairs) {
    const Matrix& ma = tf.node(a).mean;
    const Matrix& mb = te.node(b).mean;
    if (ma.rows() != mb.rows() || ma.cols() != mb.cols()) fail(ErrorKind::LengthMismatch, "hierarchy trace shapes differ");
    max_diff = std::max(max_diff, (ma - mb).cwiseAbs().maxCoeff());
    bitwise = bitwise && (ma.array() == mb.array()).all();
    const std::string dof = std::to_string(a + 1);
    cols.emplace_back("x" + dof + "_flat", ma.col(0));
    cols.emplace_back("x" + dof + "_embedded", mb.col(0));
  }
  ExperimentReport rep;
  rep.results["max_abs_difference"] = max_diff;
  rep.results["bitwise_equal"] = bitwise;
  rep.results["within_tolerance"] = max_diff <= num(p, "tolerance");
  rep.results["embedded_nodes"] = embedded.size();
  rep.results["embedded_edges"] = embedded.edges().size();
  rep.results["methods"] = {{"flattened", {{"seconds", tf.total_seconds}}}, {"embedded", {{"seconds", te.total_seconds}}}};
  rep.trajectories.push_back(make_trajectory("hierarchy", tf.t, cols));
  return rep;
}

json with(json base, const json& patch) {
  base.merge_patch(patch);
  return base;
}

}  // namespace

void register_chain_scenarios(std::vector<ScenarioInfo>& out) {
  const json c4 = chain4_defaults();
  json fwd = {{"seed", 0},
              {"replicates", 1},
              {"horizon", 10.0},
              {"dt", 1e-3},
              {"mass", 500.0},
              {"k", 5e4},
              {"c", 300.0},
              {"x1_0", 0.01},
              {"v1_0", 0.01},
              {"integrator", "heun"},
              {"reference_integrator", "heun"},
              {"inner_iterations", 1},
              {"schedules", {"jacobi", "gauss-seidel", "ab2"}}};
  out.push_back({"chain4-forward", "4-DOF chain split in two, coupling schedules against the monolithic reference", fwd,
                 run_chain4_forward});
  out.push_back({"chain4-inverse-det", "4-DOF joint state and k4 estimation, centralized vs deterministic Jacobi", c4,
                 run_chain4_inverse});
  out.push_back({"chain4-inverse-prob", "4-DOF calibration study, deterministic vs probabilistic messages",
                 with(c4, {{"replicates", 10}, {"methods", {"det", "prob"}}}), run_chain4_inverse});
  out.push_back({"chain4-inverse-learned", "SINDy-learned interface law used in probabilistic Jacobi",
                 with(c4, {{"methods", {"learned"}}}), run_chain4_inverse});
  out.push_back({"chain4-centralized", "4-DOF monolithic UKF baseline", with(c4, {{"methods", {"centralized"}}}),
                 run_chain4_inverse});
  out.push_back({"chain6-inverse", "6-DOF chain, three subsystems, joint state and parameter estimation",
                 chain6_defaults(), run_chain6_inverse});
  out.push_back({"chain6-diffusion", "defect-force sensitivity screening on the 6-DOF baseline run",
                 with(chain6_defaults(), {{"alpha", 0.6}, {"beta", 0.9}, {"baseline_mode", "prob"}, {"timing_repeats", 3}, {"methods", nullptr}}),
                 run_chain6_diffusion});
  out.push_back({"chain-scaling", "runtime against chain size, centralized vs distributed", scaling_defaults(),
                 run_chain_scaling});
  out.push_back({"hierarchy-toy", "embedded subgraph against its hand-flattened equivalent", hierarchy_defaults(),
                 run_hierarchy});
}

}  // namespace coinfer::cli
