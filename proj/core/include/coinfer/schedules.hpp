#pragma once

#include <map>
#include <string>
#include <vector>

#include "coinfer/graph.hpp"

namespace coinfer {

enum class ScheduleKind { Jacobi, GaussSeidel, AB2 };
// Incremental: max(0, var_k - var_{k-1}) per step. Full: var_k every step.
enum class InjectionRule { Incremental, Full };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_from_string(const std::string& s);

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::Jacobi;
  int inner_iterations = 1;
  std::vector<int> gs_order;  // node ids; empty means graph order
  double horizon = 0.0;
  double dt = 0.0;
  int threads = 1;
  InjectionRule injection = InjectionRule::Incremental;
  double divergence_limit = 1e12;

  long steps() const;
};

// Row n holds the measurement taken at t_{n+1} and the exogenous input used
// on step n -> n+1. NaN rows skip the correction.
struct NodeSeries {
  Matrix measurements;
  Matrix exogenous;
};
using MeasurementSet = std::map<int, NodeSeries>;

struct NodeTrace {
  int id = 0;
  Matrix mean;  // (steps+1) x state_dim, row 0 is the prior
  Matrix var;   // marginal variances, same shape
};

struct RunTrace {
  std::vector<double> t;
  std::vector<NodeTrace> nodes;
  Matrix messages;  // steps x edges, first law output seen on the final sweep
  Matrix injected;  // steps x edges, variance actually injected
  std::vector<double> step_seconds;
  double total_seconds = 0.0;

  const NodeTrace& node(int id) const;
};

RunTrace run_jacobi(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data);
RunTrace run_gauss_seidel(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data);
RunTrace run_ab2(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data);
RunTrace run_schedule(const SystemGraph& g, const ScheduleConfig& cfg, const MeasurementSet& data);

}  // namespace coinfer
