#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "coinfer/graph.hpp"
#include "coinfer/models.hpp"

namespace coinfer {

// ---------------------------------------------------------------- chains

// Link i joins DOF i and i+1; ground elements tie a DOF to the wall.
struct ChainParams {
  std::vector<double> mass;
  std::vector<double> added_mass;  // empty or n
  std::vector<double> k_link, c_link;
  std::vector<double> k_ground, c_ground;

  std::size_t n_dof() const { return mass.size(); }
  double total_mass(std::size_t i) const { return mass[i] + (added_mass.empty() ? 0.0 : added_mass[i]); }
};

// Uniform chain: ground spring on DOF 1, free last DOF.
ChainParams uniform_chain(std::size_t n, double m, double k, double c);

void validate(const ChainParams& p);

enum class ChainParamKind { LinkK, LinkC, GroundK, GroundC, AddedMass };

// Estimated as p = value / scale with a random walk on p.
struct ChainUnknown {
  ChainParamKind kind = ChainParamKind::LinkK;
  std::size_t index = 0;
  double initial = 0.0;
  double scale = 1.0;
  double prior_var = 0.04;
};

struct ChainSubsystemSpec {
  std::vector<std::size_t> dofs;          // contiguous, ascending
  std::vector<std::size_t> measured_dofs;  // accelerations, global numbering
  std::vector<double> meas_var;            // one per measured DOF
  std::vector<ChainUnknown> unknowns;
};

struct ChainFilterSpec {
  EstimatorKind estimator = EstimatorKind::UKF;
  MessageMode mode = MessageMode::Deterministic;
  IntegratorKind integrator = IntegratorKind::Euler;
  double dt = 1e-3;
  double qx = 0.0, qv = 0.0, qp = 0.0;
  double p0_x = 0.0, p0_v = 0.0;
  Vector x0, v0;  // prior mean of the kinematic states, length n
  UkfParams ukf;
  // Learned law used on interface edges when mode == Learned.
  std::optional<LearnedLaw> learned;
};

struct ChainSystem {
  ChainParams params;
  std::vector<ChainSubsystemSpec> parts;
  ChainFilterSpec spec;

  // Monolithic [x, v] with input = external force per DOF.
  Derivative truth_derivative;
  // One filter over every DOF with all unknowns appended.
  StateSpaceModel centralized_model;
  GaussianBelief centralized_prior;
  std::vector<std::size_t> centralized_measured;

  std::vector<SubsystemNode> nodes;
  std::vector<InterfaceEdge> edges;

  SystemGraph graph() const { return build_graph(nodes, edges); }
  SubsystemNode centralized_node(int id = 0) const;
  // Global DOF of local DOF j in subsystem s.
  std::size_t global_dof(std::size_t s, std::size_t j) const { return parts[s].dofs[j]; }
};

// Accelerations of the full chain, extra force per DOF in f.
Vector chain_accelerations(const ChainParams& p, const Vector& x, const Vector& v, const Vector& f);
Matrix chain_stiffness(const ChainParams& p);
Matrix chain_damping(const ChainParams& p);

// Contiguous pairs [0,1], [2,3], ...; an odd tail joins the last pair.
std::vector<ChainSubsystemSpec> pair_partition(std::size_t n);

ChainSystem build_chain(const ChainParams& params, std::vector<ChainSubsystemSpec> parts, ChainFilterSpec spec);

// ---------------------------------------------------------------- grids

struct GridBus {
  int id = 0;
  int type = 1;
  double pd = 0.0, qd = 0.0, gs = 0.0, bs = 0.0;
};

struct GridBranch {
  int from = 0, to = 0;
  double r = 0.0, x = 0.0, b = 0.0;
  double ratio = 0.0, angle_deg = 0.0;
  int status = 1;
};

struct GridGen {
  int bus = 0;
  double pg = 0.0;
  int status = 1;
};

struct GridCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<GridBus> buses;
  std::vector<GridBranch> branches;
  std::vector<GridGen> gens;

  std::size_t n_bus() const { return buses.size(); }
  std::size_t bus_index(int id) const;
  // Sorted unique 0-based indices of buses with an in-service generator.
  std::vector<std::size_t> generator_buses() const;
};

GridCase parse_matpower_case(const std::string& text, const std::string& name = "case");
GridCase load_matpower_case(const std::string& path);

using ComplexMatrix = Eigen::MatrixXcd;
ComplexMatrix build_ybus(const GridCase& c);

enum class CouplingMode { Magnitude, Susceptance };
Matrix coupling_from_ybus(const GridCase& c, CouplingMode mode);

enum class KuramotoOrder { First, Second };

struct KuramotoModel {
  KuramotoOrder order = KuramotoOrder::Second;
  Vector theta0, omega0;
  Vector natural;  // Omega
  Vector damping;
  Matrix k;
  double inertia = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(natural.size()); }
  // [theta, omega] for Second, [theta] for First.
  Vector derivative(const Vector& state) const;
  Vector initial_state() const;
};

KuramotoModel build_kuramoto(const GridCase& c, CouplingMode mode, KuramotoOrder order, Rng& rng);

struct PartitionConfig {
  std::size_t s_max = 5;
  double epsilon = 1e-12;
};

using Clusters = std::vector<std::vector<std::size_t>>;
Clusters partition_generator_seeded(const Matrix& k, const std::vector<std::size_t>& generators,
                                    const PartitionConfig& cfg);

struct GridFilterSpec {
  EstimatorKind estimator = EstimatorKind::UKF;
  double dt = 0.01;
  double p0_theta = 0.25, p0_omega = 0.25, p0_natural = 1.0;
  double q_theta = 1e-4, q_omega = 1e-4, q_natural = 1e-9;
  double sigma = 0.02;
  UkfParams ukf;
  WnlsOptions wnls;
  // Least-squares nodes carry [theta, omega] only.
  bool augment = true;
};

// Prior means are per bus, length N.
struct GridPrior {
  Vector theta, omega, natural;
};

struct GridSystem {
  Clusters clusters;
  std::vector<SubsystemNode> nodes;
  std::vector<InterfaceEdge> edges;
  SystemGraph graph() const { return build_graph(nodes, edges); }
};

// One node per cluster; cross-cluster couplings become Kuramoto edges.
GridSystem build_grid_system(const KuramotoModel& model, const Clusters& clusters, const GridFilterSpec& spec,
                             const GridPrior& prior);

// ---------------------------------------------------------------- truth

struct TruthRun {
  Matrix states;        // (steps+1) x dim
  Matrix clean;         // steps x obs, h(x_{n+1}, u_n)
  Matrix measurements;  // clean + N(0, noise_std^2)
};

// Zero-order hold on inputs(n); angles wrapped after each step.
TruthRun simulate_truth(const Derivative& f, const Measurement& h, const Vector& x0, long steps, double dt,
                        IntegratorKind integrator, const Matrix& inputs, const Vector& noise_std, Rng& rng,
                        const std::vector<Eigen::Index>& angle_states = {},
                        const std::vector<Eigen::Index>& angle_outputs = {});

}  // namespace coinfer
