#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "coinfer/estimators.hpp"
#include "coinfer/interface_laws.hpp"
#include "coinfer/models.hpp"

namespace coinfer {

enum class EstimatorKind { KF, EKF, UKF, WLS, WNLS, DeterministicPropagate };
enum class MessageMode { Deterministic, Probabilistic, Learned };

std::string to_string(EstimatorKind k);
std::string to_string(MessageMode m);
EstimatorKind estimator_from_string(const std::string& s);
MessageMode mode_from_string(const std::string& s);

using IndexList = std::vector<Eigen::Index>;

struct SubsystemNode {
  int id = 0;
  std::string name;
  StateSpaceModel model;
  EstimatorKind estimator = EstimatorKind::UKF;
  GaussianBelief belief;
  // Default interface states when an edge leaves its selectors empty.
  IndexList interface_selector;
  std::string measurement_source;
  UkfParams ukf;
  WnlsOptions wnls;
  std::optional<Jacobians> jacobians;
};

struct InterfaceEdge {
  int sender = 0;
  int receiver = 0;
  LawPtr law;
  MessageMode mode = MessageMode::Deterministic;
  IndexList sender_selector;
  IndexList receiver_selector;
  // Law output k is added to receiver input slot target_input_index + k.
  Eigen::Index target_input_index = 0;
  // Receiver state whose process noise takes the injected variance (-1: none).
  Eigen::Index target_state_index = -1;
  double injection_mass = 1.0;
  std::string label;
};

// Probabilistic and learned edges carry variance.
inline bool carries_variance(MessageMode m) { return m != MessageMode::Deterministic; }

class SystemGraph {
 public:
  const std::vector<SubsystemNode>& nodes() const { return nodes_; }
  const std::vector<InterfaceEdge>& edges() const { return edges_; }
  const SubsystemNode& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const { return nodes_.size(); }
  bool contains(int id) const { return index_.count(id) != 0; }
  std::size_t index_of(int id) const;
  std::size_t sender_index(std::size_t e) const { return sender_idx_.at(e); }
  std::size_t receiver_index(std::size_t e) const { return receiver_idx_.at(e); }
  const std::vector<std::size_t>& incoming(std::size_t node_index) const { return in_.at(node_index); }
  const std::vector<std::size_t>& outgoing(std::size_t node_index) const { return out_.at(node_index); }
  // Effective selectors after defaulting to the node's interface_selector.
  const IndexList& sender_selector(std::size_t e) const { return send_sel_.at(e); }
  const IndexList& receiver_selector(std::size_t e) const { return recv_sel_.at(e); }

 private:
  friend SystemGraph build_graph(std::vector<SubsystemNode>, std::vector<InterfaceEdge>);
  std::vector<SubsystemNode> nodes_;
  std::vector<InterfaceEdge> edges_;
  std::unordered_map<int, std::size_t> index_;
  std::vector<std::size_t> sender_idx_, receiver_idx_;
  std::vector<std::vector<std::size_t>> in_, out_;
  std::vector<IndexList> send_sel_, recv_sel_;
};

SystemGraph build_graph(std::vector<SubsystemNode> nodes, std::vector<InterfaceEdge> edges);

struct Message {
  std::size_t edge = 0;
  Vector mean;
  std::optional<double> variance;
};

struct RegisterEntry {
  Vector mean;
  Matrix cov;
  long label = -1;
};

class GlobalRegister {
 public:
  GlobalRegister() = default;
  explicit GlobalRegister(std::size_t n) : entries_(n) {}
  // Label 0 from each node's initial belief.
  static GlobalRegister initial(const SystemGraph& g);
  std::size_t size() const { return entries_.size(); }
  const RegisterEntry& at(std::size_t i) const;
  RegisterEntry& mut(std::size_t i) { return entries_.at(i); }
  void write(std::size_t i, const GaussianBelief& b, long label);
  void write_mean(std::size_t i, const Vector& mean, long label);

 private:
  std::vector<RegisterEntry> entries_;
};

struct AggregatedInput {
  Vector u;                       // receiver input_dim
  Vector variance;                // receiver state_dim, summed per target state
  std::vector<Message> messages;  // one per incoming edge, edge order
};

AggregatedInput collect_messages(const SystemGraph& g, std::size_t node_index, const GlobalRegister& reg);

// Indices into x.
Vector select(const Vector& x, const IndexList& idx);
Matrix select(const Matrix& p, const IndexList& idx);

// One outer interface of the replaced node mapped onto an inner node.
struct BoundaryPort {
  IndexList outer_states;
  int inner_node = 0;
  IndexList inner_states;
  Eigen::Index outer_input = -1;
  Eigen::Index inner_input = -1;
  Eigen::Index input_width = 0;
};

// Replaces node_id by the inner graph's nodes. Inner ids must be fresh.
SystemGraph embed_subgraph(const SystemGraph& outer, int node_id, const SystemGraph& inner,
                           const std::vector<BoundaryPort>& boundary_map);

}  // namespace coinfer
