#include "coinfer/schedules.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "coinfer/error.hpp"

namespace coinfer {

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Jacobi: return "jacobi";
    case ScheduleKind::GaussSeidel: return "gauss-seidel";
    case ScheduleKind::AB2: return "ab2";
  }
  return "?";
}

ScheduleKind schedule_from_string(const std::string& s) {
  for (auto k : {ScheduleKind::Jacobi, ScheduleKind::GaussSeidel, ScheduleKind::AB2})
    if (to_string(k) == s) return k;
  fail(ErrorKind::ConfigInvalid, "unknown schedule '" + s + "'");
}

long ScheduleConfig::steps() const {
  if (!(dt > 0.0) || !(horizon >= 0.0)) fail(ErrorKind::InvalidArgument, "schedule needs dt > 0, horizon >= 0");
  return std::lround(horizon / dt);
}

const NodeTrace& RunTrace::node(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  fail(ErrorKind::IndexOutOfRange, "trace has no node " + std::to_string(id));
}

namespace {

using Clock = std::chrono::steady_clock;

struct NodeRun {
  const SubsystemNode* node = nullptr;
  const NodeSeries* series = nullptr;
  bool needs_y = false;
  GaussianBelief belief;  // posterior at the current step start
  Vector f_prev;          // AB2 history, derivative at the previous step's mean
  bool has_prev = false;
  Matrix q_eff;
};

struct Runner {
  const SystemGraph& g;
  const ScheduleConfig& cfg;
  bool ab2;
  std::vector<NodeRun> runs;
  VarianceTracker tracker;
  std::vector<double> injected;
  std::vector<double> last_message;

  Runner(const SystemGraph& graph, const ScheduleConfig& c, const MeasurementSet& data, bool use_ab2)
      : g(graph), cfg(c), ab2(use_ab2), tracker(graph.edges().size()), injected(graph.edges().size(), 0.0),
        last_message(graph.edges().size(), 0.0) {
    if (cfg.inner_iterations < 1) fail(ErrorKind::InvalidArgument, "inner_iterations must be >= 1");
    const long n = cfg.steps();
    runs.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& nd = g.node(i);
      auto& r = runs[i];
      r.node = &nd;
      r.belief = nd.belief;
      if (std::abs(nd.model.dt - cfg.dt) > 1e-12 * std::max(1.0, cfg.dt))
        fail(ErrorKind::InvalidArgument, "node " + std::to_string(nd.id) + ": model dt differs from schedule dt");
      if (ab2 && !nd.model.continuous())
        fail(ErrorKind::InvalidArgument, "AB2 needs a continuous derivative on node " + std::to_string(nd.id));
      auto it = data.find(nd.id);
      if (it != data.end()) r.series = &it->second;
      r.needs_y = nd.estimator != EstimatorKind::DeterministicPropagate && nd.model.obs_dim > 0 &&
                  static_cast<bool>(nd.model.measurement || nd.model.linear);
      if (r.needs_y && (!r.series || r.series->measurements.rows() < n ||
                        r.series->measurements.cols() != nd.model.obs_dim))
        fail(ErrorKind::MissingMeasurement, "node " + std::to_string(nd.id) + ": measurements missing or short");
      if (r.series && r.series->exogenous.size() &&
          (r.series->exogenous.rows() < n || r.series->exogenous.cols() != nd.model.input_dim))
        fail(ErrorKind::LengthMismatch, "node " + std::to_string(nd.id) + ": exogenous input shape");
    }
  }

  Vector exogenous(std::size_t i, long step) const {
    const auto* s = runs[i].series;
    if (s && s->exogenous.size()) return s->exogenous.row(step).transpose();
    return Vector::Zero(g.node(i).model.input_dim);
  }

  const Vector* measurement(std::size_t i, long step, Vector& buf) const {
    if (!runs[i].needs_y) return nullptr;
    buf = runs[i].series->measurements.row(step).transpose();
    if (!buf.allFinite()) return nullptr;
    return &buf;
  }

  // Injection from the step-start register; sets q_eff for node i.
  void prepare_noise(std::size_t i, const AggregatedInput& agg) {
    auto& r = runs[i];
    r.q_eff = r.node->model.q;
    for (const auto& m : agg.messages) {
      if (!m.variance) continue;
      const auto& ed = g.edges()[m.edge];
      const double use = cfg.injection == InjectionRule::Incremental ? tracker.incremental(m.edge, *m.variance)
                                                                      : *m.variance;
      injected[m.edge] = use;
      r.q_eff = inject_process_noise(r.q_eff, use, cfg.dt, ed.injection_mass, ed.target_state_index);
    }
  }

  Transition step_map(const NodeRun& r) const {
    const auto& model = r.node->model;
    if (!ab2) return [&model](const Vector& x, const Vector& u) { return model.propagate(x, u); };
    const Vector* prev = r.has_prev ? &r.f_prev : nullptr;
    const double dt = cfg.dt;
    return [&model, prev, dt](const Vector& x, const Vector& u) {
      return integrate_step(IntegratorKind::AB2, model.derivative, x, u, dt, prev).next;
    };
  }

  GaussianBelief predict(const NodeRun& r, const GaussianBelief& b, const Vector& u) const {
    const auto& n = *r.node;
    const auto& model = n.model;
    switch (n.estimator) {
      case EstimatorKind::KF:
        if (!model.linear) fail(ErrorKind::InvalidArgument, "KF node without linear form");
        return kf_predict(*model.linear, b, u, r.q_eff);
      case EstimatorKind::EKF: {
        const Transition f = step_map(r);
        JacobianFn jac;
        if (n.jacobians && n.jacobians->transition && !ab2)
          jac = n.jacobians->transition;
        else if (model.linear && !ab2 && !model.transition && !model.derivative)
          jac = [m = model.linear->m](const Vector&, const Vector&) { return m; };
        else
          jac = [f](const Vector& x, const Vector& uu) { return numeric_jacobian(f, x, uu); };
        return ekf_predict(f, jac, b, u, r.q_eff);
      }
      case EstimatorKind::UKF:
        return ukf_predict(step_map(r), b, u, r.q_eff, n.ukf);
      case EstimatorKind::WLS:
      case EstimatorKind::WNLS:
      case EstimatorKind::DeterministicPropagate: {
        Vector x = step_map(r)(b.mean, u);
        return GaussianBelief(std::move(x), b.cov);
      }
    }
    return b;
  }

  GaussianBelief correct(const NodeRun& r, const GaussianBelief& b, const Vector& u, const Vector& y) const {
    const auto& n = *r.node;
    const auto& model = n.model;
    const Measurement h = [&model](const Vector& x, const Vector& uu) { return model.observe(x, uu); };
    JacobianFn hj;
    if (n.jacobians && n.jacobians->measurement) hj = n.jacobians->measurement;
    switch (n.estimator) {
      case EstimatorKind::KF:
        return kf_update(*model.linear, b, u, y, model.r, model.angle_outputs);
      case EstimatorKind::EKF:
        if (!hj) {
          if (model.linear && !model.measurement)
            hj = [hm = model.linear->h](const Vector&, const Vector&) { return hm; };
          else
            hj = [h](const Vector& x, const Vector& uu) { return numeric_jacobian(h, x, uu); };
        }
        return ekf_update(h, hj, b, u, y, model.r, model.angle_outputs);
      case EstimatorKind::UKF:
        return ukf_update(h, b, u, y, model.r, n.ukf, model.angle_outputs);
      case EstimatorKind::WLS:
        return GaussianBelief(wls_step(model, b.mean, u, y, hj), b.cov);
      case EstimatorKind::WNLS:
        return GaussianBelief(wnls_step(model, b.mean, u, y, n.wnls, hj), b.cov);
      case EstimatorKind::DeterministicPropagate:
        return b;
    }
    return b;
  }

  GaussianBelief advance(std::size_t i, const Vector& u, const Vector* y) const {
    const auto& r = runs[i];
    GaussianBelief out = predict(r, r.belief, u);
    if (y) out = correct(r, out, u, *y);
    wrap_states(out.mean, r.node->model.angle_states);
    return out;
  }

  void finish_node(std::size_t i, const Vector& u_used, GaussianBelief next) {
    auto& r = runs[i];
    if (ab2) {
      r.f_prev = r.node->model.derivative(r.belief.mean, u_used);
      r.has_prev = true;
    }
    r.belief = std::move(next);
  }

  void guard(std::size_t i, long step) const {
    const auto& b = runs[i].belief;
    if (!b.mean.allFinite() || !b.cov.allFinite() ||
        (b.mean.size() && b.mean.cwiseAbs().maxCoeff() > cfg.divergence_limit))
      fail(ErrorKind::NonFinite, "node " + std::to_string(runs[i].node->id) + " diverged at step " +
                                     std::to_string(step));
  }

  void record_messages(const AggregatedInput& agg) {
    for (const auto& m : agg.messages) last_message[m.edge] = m.mean(0);
  }
};

RunTrace make_trace(const SystemGraph& g, long steps, double dt) {
  RunTrace tr;
  tr.t.resize(static_cast<std::size_t>(steps + 1));
  for (long k = 0; k <= steps; ++k) tr.t[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
  for (const auto& n : g.nodes()) {
    NodeTrace nt;
    nt.id = n.id;
    nt.mean.resize(steps + 1, n.model.state_dim);
    nt.var.resize(steps + 1, n.model.state_dim);
    nt.mean.row(0) = n.belief.mean.transpose();
    nt.var.row(0) = n.belief.cov.diagonal().transpose();
    tr.nodes.push_back(std::move(nt));
  }
  const auto ne = static_cast<Eigen::Index>(g.edges().size());
  tr.messages = Matrix::Zero(steps, ne);
  tr.injected = Matrix::Zero(steps, ne);
  return tr;
}

void store_step(RunTrace& tr, const Runner& run, long step) {
  for (std::size_t i = 0; i < run.runs.size(); ++i) {
    tr.nodes[i].mean.row(step + 1) = run.runs[i].belief.mean.transpose();
    tr.nodes[i].var.row(step + 1) = run.runs[i].belief.cov.diagonal().transpose();
  }
  for (std::size_t e = 0; e < run.injected.size(); ++e) {
    tr.messages(step, static_cast<Eigen::Index>(e)) = run.last_message[e];
    tr.injected(step, static_cast<Eigen::Index>(e)) = run.injected[e];
  }
}

std::vector<std::size_t> sequential_order(const SystemGraph& g, const ScheduleConfig& cfg) {
  std::vector<std::size_t> order;
  if (cfg.gs_order.empty()) {
    for (std::size_t i = 0; i < g.size(); ++i) order.push_back(i);
    return order;
  }
  if (cfg.gs_order.size() != g.size()) fail(ErrorKind::InvalidArgument, "gs_order must be a permutation of node ids");
  std::vector<bool> seen(g.size(), false);
  for (int id : cfg.gs_order) {
    const auto i = g.index_of(id);
    if (seen[i]) fail(ErrorKind::InvalidArgument, "gs_order repeats node id " + std::to_string(id));
    seen[i] = true;
    order.push_back(i);
  }
  return order;
}

// Sweeps 1..K-1 write predicted beliefs; sweep K predicts from the step-start
// posterior with the latest messages and applies the measurement once.
RunTrace run_sequential(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data, bool ab2) {
  const auto t_start = Clock::now();
  Runner run(g, cfg, data, ab2);
  const long steps = cfg.steps();
  RunTrace tr = make_trace(g, steps, cfg.dt);
  const auto order = sequential_order(g, cfg);
  GlobalRegister reg = GlobalRegister::initial(g);
  Vector ybuf;
  for (long n = 0; n < steps; ++n) {
    const auto t0 = Clock::now();
    std::fill(run.injected.begin(), run.injected.end(), 0.0);
    for (int k = 1; k <= cfg.inner_iterations; ++k) {
      const bool last = k == cfg.inner_iterations;
      for (std::size_t i : order) {
        AggregatedInput agg = collect_messages(g, i, reg);
        if (k == 1) run.prepare_noise(i, agg);
        const Vector u = run.exogenous(i, n) + agg.u;
        if (!last) {
          reg.write(i, run.predict(run.runs[i], run.runs[i].belief, u), n * cfg.inner_iterations + k);
          continue;
        }
        run.record_messages(agg);
        GaussianBelief next = run.advance(i, u, run.measurement(i, n, ybuf));
        run.finish_node(i, u, std::move(next));
        run.guard(i, n);
        reg.write(i, run.runs[i].belief, (n + 1) * cfg.inner_iterations);
      }
    }
    store_step(tr, run, n);
    tr.step_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  tr.total_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
  return tr;
}

}  // namespace

RunTrace run_jacobi(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data) {
  const auto t_start = Clock::now();
  Runner run(g, cfg, data, false);
  const long steps = cfg.steps();
  RunTrace tr = make_trace(g, steps, cfg.dt);
  const std::size_t nn = g.size();
  GlobalRegister cur = GlobalRegister::initial(g);
  GlobalRegister next = cur;
  std::vector<AggregatedInput> aggs(nn);
  std::vector<Vector> ybufs(nn);
  std::vector<GaussianBelief> results(nn);
  std::vector<Vector> inputs(nn);
  const int threads = std::max(1, cfg.threads);
  tbb::task_arena arena(threads);

  auto for_nodes = [&](auto&& body) {
    if (threads == 1 || nn < 2) {
      for (std::size_t i = 0; i < nn; ++i) body(i);
    } else {
      arena.execute([&] {
        tbb::parallel_for(tbb::blocked_range<std::size_t>(0, nn), [&](const tbb::blocked_range<std::size_t>& r) {
          for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
        });
      });
    }
  };

  for (long n = 0; n < steps; ++n) {
    const auto t0 = Clock::now();
    std::fill(run.injected.begin(), run.injected.end(), 0.0);
    for (int k = 1; k <= cfg.inner_iterations; ++k) {
      const bool last = k == cfg.inner_iterations;
      for_nodes([&](std::size_t i) { aggs[i] = collect_messages(g, i, cur); });
      // Tracker and injection bookkeeping stay single-threaded.
      if (k == 1)
        for (std::size_t i = 0; i < nn; ++i) run.prepare_noise(i, aggs[i]);
      for_nodes([&](std::size_t i) {
        inputs[i] = run.exogenous(i, n) + aggs[i].u;
        if (last)
          results[i] = run.advance(i, inputs[i], run.measurement(i, n, ybufs[i]));
        else
          results[i] = run.predict(run.runs[i], run.runs[i].belief, inputs[i]);
      });
      const long label = n * cfg.inner_iterations + k;
      for (std::size_t i = 0; i < nn; ++i) {
        if (last) {
          run.record_messages(aggs[i]);
          run.finish_node(i, inputs[i], std::move(results[i]));
          run.guard(i, n);
          next.write(i, run.runs[i].belief, label);
        } else {
          next.write(i, results[i], label);
        }
      }
      std::swap(cur, next);
    }
    store_step(tr, run, n);
    tr.step_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  tr.total_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
  return tr;
}

RunTrace run_gauss_seidel(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data) {
  return run_sequential(g, cfg, data, false);
}

RunTrace run_ab2(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data) {
  return run_sequential(g, cfg, data, true);
}

RunTrace run_schedule(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data) {
  switch (cfg.kind) {
    case ScheduleKind::Jacobi: return run_jacobi(g, cfg, data);
    case ScheduleKind::GaussSeidel: return run_gauss_seidel(g, cfg, data);
    case ScheduleKind::AB2: return run_ab2(g, cfg, data);
  }
  fail(ErrorKind::InvalidArgument, "unknown schedule kind");
}

}  // namespace coinfer
