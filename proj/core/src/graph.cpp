#include "coinfer/graph.hpp"

#include <algorithm>
#include <map>

#include "coinfer/error.hpp"

namespace coinfer {

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::KF: return "KF";
    case EstimatorKind::EKF: return "EKF";
    case EstimatorKind::UKF: return "UKF";
    case EstimatorKind::WLS: return "WLS";
    case EstimatorKind::WNLS: return "WNLS";
    case EstimatorKind::DeterministicPropagate: return "DeterministicPropagate";
  }
  return "?";
}

std::string to_string(MessageMode m) {
  switch (m) {
    case MessageMode::Deterministic: return "Deterministic";
    case MessageMode::Probabilistic: return "Probabilistic";
    case MessageMode::Learned: return "Learned";
  }
  return "?";
}

EstimatorKind estimator_from_string(const std::string& s) {
  for (auto k : {EstimatorKind::KF, EstimatorKind::EKF, EstimatorKind::UKF, EstimatorKind::WLS, EstimatorKind::WNLS,
                 EstimatorKind::DeterministicPropagate})
    if (to_string(k) == s) return k;
  fail(ErrorKind::ConfigInvalid, "unknown estimator '" + s + "'");
}

MessageMode mode_from_string(const std::string& s) {
  for (auto m : {MessageMode::Deterministic, MessageMode::Probabilistic, MessageMode::Learned})
    if (to_string(m) == s) return m;
  fail(ErrorKind::ConfigInvalid, "unknown message mode '" + s + "'");
}

std::size_t SystemGraph::index_of(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorKind::DanglingEdge, "no node with id " + std::to_string(id));
  return it->second;
}

namespace {

void check_selector(const IndexList& sel, Eigen::Index dim, const std::string& what) {
  for (auto i : sel)
    if (i < 0 || i >= dim) fail(ErrorKind::SelectorOutOfRange, what + ": index " + std::to_string(i));
}

}  // namespace

SystemGraph build_graph(std::vector<SubsystemNode> nodes, std::vector<InterfaceEdge> edges) {
  SystemGraph g;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!g.index_.emplace(n.id, i).second) fail(ErrorKind::DuplicateNodeId, "duplicate node id " + std::to_string(n.id));
    validate(n.model);
    if (n.belief.dim() != n.model.state_dim)
      fail(ErrorKind::LengthMismatch, "node " + std::to_string(n.id) + ": belief dim != state_dim");
    check_selector(n.interface_selector, n.model.state_dim, "node " + std::to_string(n.id) + " interface_selector");
  }
  g.in_.assign(nodes.size(), {});
  g.out_.assign(nodes.size(), {});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& ed = edges[e];
    const std::string tag = "edge " + std::to_string(ed.sender) + "->" + std::to_string(ed.receiver);
    auto si = g.index_.find(ed.sender);
    auto ri = g.index_.find(ed.receiver);
    if (si == g.index_.end() || ri == g.index_.end()) fail(ErrorKind::DanglingEdge, tag + ": missing endpoint");
    if (ed.sender == ed.receiver) fail(ErrorKind::DanglingEdge, tag + ": self loop");
    if (!ed.law) fail(ErrorKind::InvalidArgument, tag + ": no law");
    const auto& sn = nodes[si->second];
    const auto& rn = nodes[ri->second];
    IndexList ss = ed.sender_selector.empty() ? sn.interface_selector : ed.sender_selector;
    IndexList rs = ed.receiver_selector;
    if (rs.empty() && ed.law->receiver_dim() > 0) rs = rn.interface_selector;
    check_selector(ss, sn.model.state_dim, tag + " sender selector");
    check_selector(rs, rn.model.state_dim, tag + " receiver selector");
    if (static_cast<Eigen::Index>(ss.size()) != ed.law->sender_dim() ||
        static_cast<Eigen::Index>(rs.size()) != ed.law->receiver_dim())
      fail(ErrorKind::SelectorOutOfRange, tag + ": selector sizes do not match law arity");
    if (ed.target_input_index < 0 || ed.target_input_index + ed.law->output_dim() > rn.model.input_dim)
      fail(ErrorKind::SelectorOutOfRange, tag + ": target input out of range");
    if (carries_variance(ed.mode)) {
      if (ed.target_state_index < 0 || ed.target_state_index >= rn.model.state_dim)
        fail(ErrorKind::SelectorOutOfRange, tag + ": probabilistic edge needs a target state");
      if (ed.law->output_dim() != 1) fail(ErrorKind::InvalidArgument, tag + ": probabilistic edge needs scalar law");
      if (!(ed.injection_mass > 0.0)) fail(ErrorKind::InvalidArgument, tag + ": injection mass must be > 0");
    } else if (ed.target_state_index >= rn.model.state_dim) {
      fail(ErrorKind::SelectorOutOfRange, tag + ": target state out of range");
    }
    g.sender_idx_.push_back(si->second);
    g.receiver_idx_.push_back(ri->second);
    g.out_[si->second].push_back(e);
    g.in_[ri->second].push_back(e);
    g.send_sel_.push_back(std::move(ss));
    g.recv_sel_.push_back(std::move(rs));
  }
  g.nodes_ = std::move(nodes);
  g.edges_ = std::move(edges);
  return g;
}

GlobalRegister GlobalRegister::initial(const SystemGraph& g) {
  GlobalRegister r(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) r.write(i, g.node(i).belief, 0);
  return r;
}

const RegisterEntry& GlobalRegister::at(std::size_t i) const {
  if (i >= entries_.size() || entries_[i].label < 0)
    fail(ErrorKind::MissingRegisterEntry, "register has no entry for node index " + std::to_string(i));
  return entries_[i];
}

void GlobalRegister::write(std::size_t i, const GaussianBelief& b, long label) {
  auto& e = entries_.at(i);
  e.mean = b.mean;
  e.cov = b.cov;
  e.label = label;
}

void GlobalRegister::write_mean(std::size_t i, const Vector& mean, long label) {
  auto& e = entries_.at(i);
  e.mean = mean;
  e.label = label;
}

Vector select(const Vector& x, const IndexList& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(idx[k]);
  return out;
}

Matrix select(const Matrix& p, const IndexList& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Matrix out(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) out(a, b) = p(idx[a], idx[b]);
  return out;
}

AggregatedInput collect_messages(const SystemGraph& g, std::size_t node_index, const GlobalRegister& reg) {
  const auto& rn = g.node(node_index);
  AggregatedInput agg;
  agg.u = Vector::Zero(rn.model.input_dim);
  agg.variance = Vector::Zero(rn.model.state_dim);
  const auto& incoming = g.incoming(node_index);
  if (incoming.empty()) return agg;
  const auto& recv = reg.at(node_index);
  for (std::size_t e : incoming) {
    const auto& ed = g.edges()[e];
    const auto& send = reg.at(g.sender_index(e));
    const Vector s = select(send.mean, g.sender_selector(e));
    const Vector r = select(recv.mean, g.receiver_selector(e));
    Message m;
    m.edge = e;
    m.mean = ed.law->eval(s, r);
    if (carries_variance(ed.mode)) {
      const double v = ed.law->variance(s, select(send.cov, g.sender_selector(e)), r,
                                        select(recv.cov, g.receiver_selector(e)));
      m.variance = v;
      agg.variance(ed.target_state_index) += v;
    }
    agg.u.segment(ed.target_input_index, m.mean.size()) += m.mean;
    agg.messages.push_back(std::move(m));
  }
  return agg;
}

namespace {

const BoundaryPort& find_port(const std::vector<BoundaryPort>& ports, const IndexList& outer_sel) {
  for (const auto& p : ports)
    if (p.outer_states == outer_sel) return p;
  fail(ErrorKind::BoundaryMismatch, "no boundary port for an outer interface selector");
}

Eigen::Index map_state(const BoundaryPort& p, Eigen::Index outer) {
  for (std::size_t k = 0; k < p.outer_states.size(); ++k)
    if (p.outer_states[k] == outer) return p.inner_states[k];
  fail(ErrorKind::BoundaryMismatch, "target state not covered by boundary port");
}

}  // namespace

SystemGraph embed_subgraph(const SystemGraph& outer, int node_id, const SystemGraph& inner,
                           const std::vector<BoundaryPort>& boundary_map) {
  const std::size_t host = outer.index_of(node_id);
  for (const auto& p : boundary_map) {
    if (p.outer_states.size() != p.inner_states.size())
      fail(ErrorKind::BoundaryMismatch, "boundary port selector sizes differ");
    if (!inner.contains(p.inner_node)) fail(ErrorKind::BoundaryMismatch, "boundary port names a missing inner node");
    const auto& in = inner.node(inner.index_of(p.inner_node));
    check_selector(p.inner_states, in.model.state_dim, "boundary inner selector");
    check_selector(p.outer_states, outer.node(host).model.state_dim, "boundary outer selector");
    if (p.input_width > 0) {
      if (p.outer_input < 0 || p.inner_input < 0 || p.inner_input + p.input_width > in.model.input_dim ||
          p.outer_input + p.input_width > outer.node(host).model.input_dim)
        fail(ErrorKind::BoundaryMismatch, "boundary input window out of range");
    }
  }

  std::vector<SubsystemNode> nodes;
  for (std::size_t i = 0; i < outer.size(); ++i) {
    if (i == host) {
      for (const auto& n : inner.nodes()) {
        if (outer.contains(n.id) && n.id != node_id)
          fail(ErrorKind::DuplicateNodeId, "inner node id " + std::to_string(n.id) + " collides with outer graph");
        nodes.push_back(n);
      }
    } else {
      nodes.push_back(outer.node(i));
    }
  }

  std::vector<InterfaceEdge> edges;
  for (std::size_t e = 0; e < outer.edges().size(); ++e) {
    InterfaceEdge ed = outer.edges()[e];
    ed.sender_selector = outer.sender_selector(e);
    ed.receiver_selector = outer.receiver_selector(e);
    if (ed.sender == node_id) {
      const auto& p = find_port(boundary_map, ed.sender_selector);
      ed.sender = p.inner_node;
      ed.sender_selector = p.inner_states;
    }
    if (ed.receiver == node_id) {
      const BoundaryPort* port = nullptr;
      if (!ed.receiver_selector.empty()) {
        port = &find_port(boundary_map, ed.receiver_selector);
      } else {
        for (const auto& p : boundary_map)
          if (p.input_width > 0 && ed.target_input_index >= p.outer_input &&
              ed.target_input_index < p.outer_input + p.input_width)
            port = &p;
        if (!port) fail(ErrorKind::BoundaryMismatch, "no boundary port receives edge input");
      }
      const auto w = ed.law->output_dim();
      if (port->input_width < w || ed.target_input_index < port->outer_input ||
          ed.target_input_index + w > port->outer_input + port->input_width)
        fail(ErrorKind::BoundaryMismatch, "edge input does not fit the boundary input window");
      ed.target_input_index = port->inner_input + (ed.target_input_index - port->outer_input);
      if (ed.target_state_index >= 0) ed.target_state_index = map_state(*port, ed.target_state_index);
      ed.receiver = port->inner_node;
      ed.receiver_selector = port->inner_states;
      if (ed.law->receiver_dim() == 0) ed.receiver_selector.clear();
    }
    edges.push_back(std::move(ed));
  }
  for (std::size_t e = 0; e < inner.edges().size(); ++e) {
    InterfaceEdge ed = inner.edges()[e];
    ed.sender_selector = inner.sender_selector(e);
    ed.receiver_selector = inner.receiver_selector(e);
    edges.push_back(std::move(ed));
  }
  return build_graph(std::move(nodes), std::move(edges));
}

}  // namespace coinfer
