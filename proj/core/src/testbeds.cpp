#include "coinfer/testbeds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "coinfer/error.hpp"

namespace coinfer {

// ================================================================ chains

ChainParams uniform_chain(std::size_t n, double m, double k, double c) {
  ChainParams p;
  p.mass.assign(n, m);
  p.k_link.assign(n > 0 ? n - 1 : 0, k);
  p.c_link.assign(n > 0 ? n - 1 : 0, c);
  p.k_ground.assign(n, 0.0);
  p.c_ground.assign(n, 0.0);
  if (n > 0) {
    p.k_ground[0] = k;
    p.c_ground[0] = c;
  }
  return p;
}

void validate(const ChainParams& p) {
  const std::size_t n = p.n_dof();
  if (n < 2) fail(ErrorKind::InvalidParams, "chain needs at least 2 DOFs");
  if (p.k_link.size() != n - 1 || p.c_link.size() != n - 1)
    fail(ErrorKind::InvalidParams, "chain needs n-1 link stiffnesses and dampings");
  if (p.k_ground.size() != n || p.c_ground.size() != n)
    fail(ErrorKind::InvalidParams, "chain needs n ground stiffnesses and dampings");
  if (!p.added_mass.empty() && p.added_mass.size() != n) fail(ErrorKind::InvalidParams, "added_mass length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(p.total_mass(i) > 0.0)) fail(ErrorKind::InvalidParams, "chain masses must be positive");
    if (p.k_ground[i] < 0.0 || p.c_ground[i] < 0.0) fail(ErrorKind::InvalidParams, "negative ground element");
  }
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (p.k_link[i] < 0.0 || p.c_link[i] < 0.0) fail(ErrorKind::InvalidParams, "negative link element");
}

namespace {

Matrix assemble(std::size_t n, const std::vector<double>& link, const std::vector<double>& ground) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) m(i, i) += ground[i];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    m(i, i) += link[i];
    m(i + 1, i + 1) += link[i];
    m(i, i + 1) -= link[i];
    m(i + 1, i) -= link[i];
  }
  return m;
}

}  // namespace

Matrix chain_stiffness(const ChainParams& p) { return assemble(p.n_dof(), p.k_link, p.k_ground); }
Matrix chain_damping(const ChainParams& p) { return assemble(p.n_dof(), p.c_link, p.c_ground); }

Vector chain_accelerations(const ChainParams& p, const Vector& x, const Vector& v, const Vector& f) {
  const std::size_t n = p.n_dof();
  Vector a(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) a(i) = f(i) - p.k_ground[i] * x(i) - p.c_ground[i] * v(i);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double fl = p.k_link[i] * (x(i) - x(i + 1)) + p.c_link[i] * (v(i) - v(i + 1));
    a(i) -= fl;
    a(i + 1) += fl;
  }
  for (std::size_t i = 0; i < n; ++i) a(i) /= p.total_mass(i);
  return a;
}

std::vector<ChainSubsystemSpec> pair_partition(std::size_t n) {
  std::vector<ChainSubsystemSpec> parts;
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    ChainSubsystemSpec s;
    s.dofs = {i, i + 1};
    parts.push_back(s);
  }
  if (n % 2 == 1 && !parts.empty()) parts.back().dofs.push_back(n - 1);
  return parts;
}

namespace {

// A contiguous block of the chain with its own links, grounds and unknowns.
struct LocalChain {
  struct Link {
    std::size_t a, b;  // local DOFs
    double k, c;
    int k_param = -1, c_param = -1;
  };
  std::size_t m = 0;
  std::vector<double> mass, kg, cg;
  std::vector<int> mass_param, kg_param, cg_param;
  std::vector<Link> links;
  std::vector<double> scale;  // per unknown
  std::vector<std::size_t> measured;  // local DOFs

  std::size_t np() const { return scale.size(); }

  double value(double nominal, int param, const Vector& z) const {
    return param < 0 ? nominal : scale[param] * z(2 * m + param);
  }

  Vector accel(const Vector& z, const Vector& u) const {
    Vector f = u;
    for (std::size_t j = 0; j < m; ++j)
      f(j) -= value(kg[j], kg_param[j], z) * z(j) + value(cg[j], cg_param[j], z) * z(m + j);
    for (const auto& l : links) {
      const double fl = value(l.k, l.k_param, z) * (z(l.a) - z(l.b)) + value(l.c, l.c_param, z) * (z(m + l.a) - z(m + l.b));
      f(l.a) -= fl;
      f(l.b) += fl;
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double extra = mass_param[j] < 0 ? 0.0 : scale[mass_param[j]] * z(2 * m + mass_param[j]);
      f(j) /= mass[j] + extra;
    }
    return f;
  }
};

LocalChain make_local(const ChainParams& p, const std::vector<std::size_t>& dofs,
                      const std::vector<ChainUnknown>& unknowns, const std::vector<std::size_t>& measured) {
  LocalChain lc;
  lc.m = dofs.size();
  std::map<std::size_t, std::size_t> local;
  for (std::size_t j = 0; j < dofs.size(); ++j) {
    local[dofs[j]] = j;
    const std::size_t i = dofs[j];
    // Added mass that is estimated enters through its parameter instead.
    lc.mass.push_back(p.mass[i] + (p.added_mass.empty() ? 0.0 : p.added_mass[i]));
    lc.kg.push_back(p.k_ground[i]);
    lc.cg.push_back(p.c_ground[i]);
  }
  lc.mass_param.assign(lc.m, -1);
  lc.kg_param.assign(lc.m, -1);
  lc.cg_param.assign(lc.m, -1);
  for (std::size_t j = 0; j + 1 < dofs.size(); ++j) {
    const std::size_t i = dofs[j];
    lc.links.push_back({j, j + 1, p.k_link[i], p.c_link[i]});
  }
  auto local_of = [&](std::size_t g) -> std::size_t {
    auto it = local.find(g);
    if (it == local.end()) fail(ErrorKind::InvalidParams, "unknown parameter outside its subsystem");
    return it->second;
  };
  for (std::size_t u = 0; u < unknowns.size(); ++u) {
    const auto& uk = unknowns[u];
    if (!(uk.scale > 0.0)) fail(ErrorKind::InvalidParams, "unknown parameter scale must be > 0");
    lc.scale.push_back(uk.scale);
    const int pi = static_cast<int>(u);
    switch (uk.kind) {
      case ChainParamKind::LinkK:
      case ChainParamKind::LinkC: {
        const std::size_t a = local_of(uk.index);
        local_of(uk.index + 1);
        auto& l = lc.links.at(a);
        (uk.kind == ChainParamKind::LinkK ? l.k_param : l.c_param) = pi;
        break;
      }
      case ChainParamKind::GroundK: lc.kg_param[local_of(uk.index)] = pi; break;
      case ChainParamKind::GroundC: lc.cg_param[local_of(uk.index)] = pi; break;
      case ChainParamKind::AddedMass: {
        const std::size_t j = local_of(uk.index);
        lc.mass_param[j] = pi;
        lc.mass[j] = p.mass[uk.index];
        break;
      }
    }
  }
  for (auto g : measured) lc.measured.push_back(local_of(g));
  return lc;
}

StateSpaceModel make_chain_model(const LocalChain& lc, const ChainFilterSpec& spec, const std::vector<double>& meas_var) {
  StateSpaceModel model;
  const auto m = static_cast<Eigen::Index>(lc.m);
  const auto np = static_cast<Eigen::Index>(lc.np());
  model.state_dim = 2 * m + np;
  model.input_dim = m;
  model.obs_dim = static_cast<Eigen::Index>(lc.measured.size());
  model.dt = spec.dt;
  model.integrator = spec.integrator;
  model.derivative = [lc](const Vector& z, const Vector& u) {
    const auto mm = static_cast<Eigen::Index>(lc.m);
    Vector d = Vector::Zero(z.size());
    d.head(mm) = z.segment(mm, mm);
    d.segment(mm, mm) = lc.accel(z, u);
    return d;
  };
  if (!lc.measured.empty()) {
    model.measurement = [lc](const Vector& z, const Vector& u) {
      const Vector a = lc.accel(z, u);
      Vector y(static_cast<Eigen::Index>(lc.measured.size()));
      for (std::size_t k = 0; k < lc.measured.size(); ++k) y(k) = a(lc.measured[k]);
      return y;
    };
  }
  Vector q(model.state_dim);
  q << Vector::Constant(m, spec.qx), Vector::Constant(m, spec.qv), Vector::Constant(np, spec.qp);
  model.q = q.asDiagonal();
  if (meas_var.size() != lc.measured.size()) fail(ErrorKind::InvalidParams, "one measurement variance per measured DOF");
  Vector r(model.obs_dim);
  for (std::size_t k = 0; k < meas_var.size(); ++k) {
    if (!(meas_var[k] > 0.0)) fail(ErrorKind::InvalidParams, "measurement variance must be > 0");
    r(k) = meas_var[k];
  }
  model.r = r.asDiagonal();
  return model;
}

GaussianBelief make_chain_prior(const std::vector<std::size_t>& dofs, const std::vector<ChainUnknown>& unknowns,
                                const ChainFilterSpec& spec) {
  const auto m = static_cast<Eigen::Index>(dofs.size());
  const auto np = static_cast<Eigen::Index>(unknowns.size());
  Vector mean(2 * m + np), var(2 * m + np);
  for (Eigen::Index j = 0; j < m; ++j) {
    mean(j) = spec.x0(dofs[j]);
    mean(m + j) = spec.v0(dofs[j]);
    var(j) = spec.p0_x;
    var(m + j) = spec.p0_v;
  }
  for (Eigen::Index u = 0; u < np; ++u) {
    mean(2 * m + u) = unknowns[u].initial / unknowns[u].scale;
    var(2 * m + u) = unknowns[u].prior_var;
  }
  return GaussianBelief(mean, var.asDiagonal());
}

}  // namespace

SubsystemNode ChainSystem::centralized_node(int id) const {
  SubsystemNode n;
  n.id = id;
  n.name = "centralized";
  n.model = centralized_model;
  n.estimator = spec.estimator;
  n.belief = centralized_prior;
  n.ukf = spec.ukf;
  return n;
}

ChainSystem build_chain(const ChainParams& params, std::vector<ChainSubsystemSpec> parts, ChainFilterSpec spec) {
  validate(params);
  const std::size_t n = params.n_dof();
  if (parts.empty()) fail(ErrorKind::InvalidParams, "chain partition is empty");
  if (spec.x0.size() == 0) spec.x0 = Vector::Zero(static_cast<Eigen::Index>(n));
  if (spec.v0.size() == 0) spec.v0 = Vector::Zero(static_cast<Eigen::Index>(n));
  if (spec.x0.size() != static_cast<Eigen::Index>(n) || spec.v0.size() != static_cast<Eigen::Index>(n))
    fail(ErrorKind::InvalidParams, "prior means need one entry per DOF");
  std::vector<int> owner(n, -1);
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto& d = parts[s].dofs;
    if (d.empty()) fail(ErrorKind::InvalidParams, "empty subsystem");
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (d[j] >= n || owner[d[j]] >= 0) fail(ErrorKind::InvalidParams, "partition must cover each DOF once");
      if (j > 0 && d[j] != d[j - 1] + 1) fail(ErrorKind::InvalidParams, "subsystem DOFs must be contiguous");
      owner[d[j]] = static_cast<int>(s);
    }
    if (parts[s].meas_var.size() != parts[s].measured_dofs.size())
      fail(ErrorKind::InvalidParams, "one measurement variance per measured DOF");
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end())
    fail(ErrorKind::InvalidParams, "partition leaves a DOF unassigned");

  ChainSystem sys;
  sys.params = params;
  sys.parts = parts;
  sys.spec = spec;

  sys.truth_derivative = [params](const Vector& z, const Vector& u) {
    const auto nn = static_cast<Eigen::Index>(params.n_dof());
    Vector d(2 * nn);
    d.head(nn) = z.tail(nn);
    d.tail(nn) = chain_accelerations(params, z.head(nn), z.tail(nn), u);
    return d;
  };

  // Centralized: every DOF in one block, unknowns and sensors concatenated.
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::vector<ChainUnknown> all_unknowns;
  std::vector<std::size_t> all_measured;
  std::vector<double> all_var;
  for (const auto& p : parts) {
    all_unknowns.insert(all_unknowns.end(), p.unknowns.begin(), p.unknowns.end());
    all_measured.insert(all_measured.end(), p.measured_dofs.begin(), p.measured_dofs.end());
    all_var.insert(all_var.end(), p.meas_var.begin(), p.meas_var.end());
  }
  const LocalChain central = make_local(params, all, all_unknowns, all_measured);
  sys.centralized_model = make_chain_model(central, spec, all_var);
  sys.centralized_prior = make_chain_prior(all, all_unknowns, spec);
  sys.centralized_measured = all_measured;

  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto& p = parts[s];
    const LocalChain lc = make_local(params, p.dofs, p.unknowns, p.measured_dofs);
    SubsystemNode node;
    node.id = static_cast<int>(s);
    node.name = "S" + std::to_string(s + 1);
    node.model = make_chain_model(lc, spec, p.meas_var);
    node.estimator = spec.estimator;
    node.belief = make_chain_prior(p.dofs, p.unknowns, spec);
    node.ukf = spec.ukf;
    sys.nodes.push_back(std::move(node));
  }

  // Links whose ends sit in different subsystems become edge pairs.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const int a = owner[i], b = owner[i + 1];
    if (a == b) continue;
    for (const auto& p : parts)
      for (const auto& uk : p.unknowns)
        if ((uk.kind == ChainParamKind::LinkK || uk.kind == ChainParamKind::LinkC) && uk.index == i)
          fail(ErrorKind::InvalidParams, "interface links must be known");
    const auto ma = static_cast<Eigen::Index>(parts[a].dofs.size());
    const auto mb = static_cast<Eigen::Index>(parts[b].dofs.size());
    const Eigen::Index ja = ma - 1;  // i is the last DOF of a
    const Eigen::Index jb = 0;
    LawPtr fwd, rev;
    if (spec.mode == MessageMode::Learned) {
      if (!spec.learned) fail(ErrorKind::InvalidParams, "learned mode without a learned law");
      fwd = std::make_shared<LearnedEdgeLaw>(*spec.learned, 1.0, false);
      rev = std::make_shared<LearnedEdgeLaw>(*spec.learned, 1.0, true);
    } else {
      const SpringDamperLaw law{params.k_link[i], params.c_link[i], 1.0};
      fwd = std::make_shared<SpringDamperEdgeLaw>(law);
      rev = fwd;
    }
    InterfaceEdge ab;
    ab.sender = a;
    ab.receiver = b;
    ab.law = fwd;
    ab.mode = spec.mode;
    ab.sender_selector = {ja, ma + ja};
    ab.receiver_selector = {jb, mb + jb};
    ab.target_input_index = jb;
    ab.target_state_index = mb + jb;
    ab.injection_mass = params.total_mass(i + 1);
    ab.label = "link" + std::to_string(i + 1);
    InterfaceEdge ba;
    ba.sender = b;
    ba.receiver = a;
    ba.law = rev;
    ba.mode = spec.mode;
    ba.sender_selector = {jb, mb + jb};
    ba.receiver_selector = {ja, ma + ja};
    ba.target_input_index = ja;
    ba.target_state_index = ma + ja;
    ba.injection_mass = params.total_mass(i);
    ba.label = "link" + std::to_string(i + 1) + "r";
    sys.edges.push_back(std::move(ab));
    sys.edges.push_back(std::move(ba));
  }
  return sys;
}

// ================================================================ grids

std::size_t GridCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return i;
  fail(ErrorKind::ParseError, name + ": unknown bus id " + std::to_string(id));
}

std::vector<std::size_t> GridCase::generator_buses() const {
  std::set<std::size_t> s;
  for (const auto& g : gens)
    if (g.status > 0) s.insert(bus_index(g.bus));
  return {s.begin(), s.end()};
}

namespace {

std::string strip_comment(const std::string& line) {
  const auto p = line.find('%');
  return p == std::string::npos ? line : line.substr(0, p);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_error(const std::string& name, std::size_t line, std::size_t col, const std::string& what) {
  fail(ErrorKind::ParseError, name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
}

}  // namespace

GridCase parse_matpower_case(const std::string& text, const std::string& name) {
  GridCase gc;
  gc.name = name;
  std::map<std::string, std::vector<std::vector<double>>> tables;
  std::map<std::string, std::size_t> table_line;
  bool have_base = false;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  std::string current;  // table being read
  std::vector<double> row;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (current.empty()) {
      if (line.rfind("function", 0) == 0) continue;
      if (line.rfind("mpc.", 0) != 0) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) parse_error(name, lineno, 1, "expected '=' in assignment");
      const std::string key = trim(line.substr(4, eq - 4));
      std::string rhs = trim(line.substr(eq + 1));
      if (key == "baseMVA") {
        if (!rhs.empty() && rhs.back() == ';') rhs.pop_back();
        try {
          gc.base_mva = std::stod(rhs);
        } catch (const std::exception&) {
          parse_error(name, lineno, eq + 2, "bad baseMVA value");
        }
        have_base = true;
        continue;
      }
      if (key == "version") continue;
      if (rhs.empty() || rhs[0] != '[') {
        spdlog::warn("{}:{}: ignoring unsupported field mpc.{}", name, lineno, key);
        continue;
      }
      if (key != "bus" && key != "gen" && key != "branch") {
        spdlog::warn("{}:{}: ignoring unsupported table mpc.{}", name, lineno, key);
      }
      current = key;
      table_line[key] = lineno;
      tables[key];
      line = trim(rhs.substr(1));
      if (line.empty()) continue;
    }
    // Inside a table: numbers, ';' row breaks, '];' terminator.
    std::size_t pos = 0;
    while (pos < line.size()) {
      const char ch = line[pos];
      if (ch == ' ' || ch == '\t' || ch == ',') {
        ++pos;
      } else if (ch == ';') {
        if (!row.empty()) tables[current].push_back(std::move(row));
        row.clear();
        ++pos;
      } else if (ch == ']') {
        if (!row.empty()) tables[current].push_back(std::move(row));
        row.clear();
        current.clear();
        break;
      } else {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(line.substr(pos), &used);
        } catch (const std::exception&) {
          parse_error(name, lineno, pos + 1, "expected a number");
        }
        row.push_back(v);
        pos += used;
      }
    }
    if (!current.empty() && !row.empty()) {
      tables[current].push_back(std::move(row));
      row.clear();
    }
  }
  if (!current.empty()) parse_error(name, lineno, 1, "unterminated table mpc." + current);
  if (!have_base) parse_error(name, lineno, 1, "missing mpc.baseMVA");
  if (!(gc.base_mva > 0.0)) parse_error(name, lineno, 1, "baseMVA must be positive");
  for (const char* req : {"bus", "branch", "gen"})
    if (!tables.count(req)) parse_error(name, lineno, 1, std::string("missing table mpc.") + req);

  auto need = [&](const std::string& t, const std::vector<double>& r, std::size_t k, std::size_t idx) {
    if (r.size() < k)
      parse_error(name, table_line[t] + idx + 1, 1, "mpc." + t + " row needs at least " + std::to_string(k) + " columns");
  };
  for (std::size_t i = 0; i < tables["bus"].size(); ++i) {
    const auto& r = tables["bus"][i];
    need("bus", r, 6, i);
    gc.buses.push_back({static_cast<int>(r[0]), static_cast<int>(r[1]), r[2], r[3], r[4], r[5]});
  }
  for (std::size_t i = 0; i < tables["gen"].size(); ++i) {
    const auto& r = tables["gen"][i];
    need("gen", r, 2, i);
    gc.gens.push_back({static_cast<int>(r[0]), r[1], r.size() > 7 ? static_cast<int>(r[7]) : 1});
  }
  for (std::size_t i = 0; i < tables["branch"].size(); ++i) {
    const auto& r = tables["branch"][i];
    need("branch", r, 4, i);
    GridBranch b;
    b.from = static_cast<int>(r[0]);
    b.to = static_cast<int>(r[1]);
    b.r = r[2];
    b.x = r[3];
    b.b = r.size() > 4 ? r[4] : 0.0;
    b.ratio = r.size() > 8 ? r[8] : 0.0;
    b.angle_deg = r.size() > 9 ? r[9] : 0.0;
    b.status = r.size() > 10 ? static_cast<int>(r[10]) : 1;
    gc.branches.push_back(b);
  }
  if (gc.buses.empty()) parse_error(name, lineno, 1, "case has no buses");
  for (const auto& b : gc.branches) {
    gc.bus_index(b.from);
    gc.bus_index(b.to);
  }
  for (const auto& g : gc.gens) gc.bus_index(g.bus);
  return gc;
}

GridCase load_matpower_case(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot read case file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string name = path;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  return parse_matpower_case(ss.str(), name);
}

ComplexMatrix build_ybus(const GridCase& c) {
  using cd = std::complex<double>;
  const auto n = static_cast<Eigen::Index>(c.n_bus());
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  for (const auto& br : c.branches) {
    if (br.status <= 0) continue;
    const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
    const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
    const cd z(br.r, br.x);
    if (std::abs(z) == 0.0) fail(ErrorKind::InvalidParams, "branch with zero impedance");
    const cd ys = 1.0 / z;
    const double ratio = br.ratio == 0.0 ? 1.0 : br.ratio;
    const cd tap = std::polar(ratio, br.angle_deg * M_PI / 180.0);
    const cd ytt = ys + cd(0.0, br.b / 2.0);
    const cd yff = ytt / (tap * std::conj(tap));
    y(f, f) += yff;
    y(f, t) += -ys / std::conj(tap);
    y(t, f) += -ys / tap;
    y(t, t) += ytt;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = c.buses[static_cast<std::size_t>(i)];
    y(i, i) += cd(b.gs, b.bs) / c.base_mva;
  }
  return y;
}

Matrix coupling_from_ybus(const GridCase& c, CouplingMode mode) {
  const ComplexMatrix y = build_ybus(c);
  const auto n = y.rows();
  Matrix k = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) k(i, j) = mode == CouplingMode::Magnitude ? std::abs(y(i, j)) : y(i, j).imag();
  return k;
}

Vector KuramotoModel::derivative(const Vector& s) const {
  const auto n = static_cast<Eigen::Index>(size());
  const Vector th = s.head(n);
  Vector coupling = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (k(i, j) != 0.0) coupling(i) += k(i, j) * std::sin(th(j) - th(i));
  if (order == KuramotoOrder::First) return natural + coupling;
  Vector d(2 * n);
  d.head(n) = s.segment(n, n);
  d.tail(n) = (-damping.cwiseProduct(s.segment(n, n)) + natural + coupling) / inertia;
  return d;
}

Vector KuramotoModel::initial_state() const {
  if (order == KuramotoOrder::First) return theta0;
  Vector s(theta0.size() * 2);
  s << theta0, omega0;
  return s;
}

KuramotoModel build_kuramoto(const GridCase& c, CouplingMode mode, KuramotoOrder order, Rng& rng) {
  KuramotoModel m;
  m.order = order;
  m.k = coupling_from_ybus(c, mode);
  const auto n = static_cast<Eigen::Index>(c.n_bus());
  m.damping.resize(n);
  m.natural.resize(n);
  m.theta0.resize(n);
  m.omega0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) m.damping(i) = std::round(rng.uniform(0.1, 0.3) * 100.0) / 100.0;
  for (Eigen::Index i = 0; i < n; ++i) m.natural(i) = -1.0 + 0.1 * rng.uniform_int(0, 20);
  for (Eigen::Index i = 0; i < n; ++i) m.theta0(i) = wrap_angle(rng.uniform(-0.5, 0.5));
  for (Eigen::Index i = 0; i < n; ++i) m.omega0(i) = rng.uniform(-0.2, 0.2);
  return m;
}

namespace {

struct Score {
  double w = 0.0, rho = 0.0;
  bool better(const Score& o) const { return w > o.w || (w == o.w && rho > o.rho); }
};

Score score(const Matrix& k, const std::vector<bool>& in_cluster, const std::vector<std::size_t>& members,
            std::size_t v, double eps) {
  Score s;
  double cut = 0.0;
  for (std::size_t u : members) s.w += k(v, u);
  for (Eigen::Index u = 0; u < k.cols(); ++u)
    if (!in_cluster[u] && static_cast<std::size_t>(u) != v) cut += k(v, u);
  s.rho = s.w / (cut + eps);
  return s;
}

}  // namespace

Clusters partition_generator_seeded(const Matrix& k, const std::vector<std::size_t>& generators,
                                    const PartitionConfig& cfg) {
  if (cfg.s_max < 1 || !(cfg.epsilon > 0.0)) fail(ErrorKind::InvalidParams, "partition config");
  if (k.rows() != k.cols()) fail(ErrorKind::InvalidArgument, "coupling matrix must be square");
  const auto n = static_cast<std::size_t>(k.rows());
  std::vector<std::size_t> gens = generators;
  std::sort(gens.begin(), gens.end());
  if (gens.empty() || std::adjacent_find(gens.begin(), gens.end()) != gens.end())
    fail(ErrorKind::InvalidArgument, "generator ids must be non-empty and distinct");
  std::vector<int> owner(n, -1);
  Clusters cl;
  std::vector<std::vector<bool>> mask;
  for (std::size_t g : gens) {
    if (g >= n) fail(ErrorKind::IndexOutOfRange, "generator id out of range");
    owner[g] = static_cast<int>(cl.size());
    cl.push_back({g});
    mask.emplace_back(n, false);
    mask.back()[g] = true;
  }
  auto add = [&](std::size_t c, std::size_t v) {
    owner[v] = static_cast<int>(c);
    cl[c].push_back(v);
    mask[c][v] = true;
  };

  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t c = 0; c < cl.size(); ++c) {
      if (cl[c].size() >= cfg.s_max) continue;
      int best = -1;
      Score bs;
      for (std::size_t v = 0; v < n; ++v) {
        if (owner[v] >= 0) continue;
        const Score s = score(k, mask[c], cl[c], v, cfg.epsilon);
        if (!(s.w > 0.0)) continue;
        if (best < 0 || s.better(bs)) {
          best = static_cast<int>(v);
          bs = s;
        }
      }
      if (best >= 0) {
        add(c, static_cast<std::size_t>(best));
        grew = true;
      }
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    if (owner[v] >= 0) continue;
    int best = -1;
    Score bs;
    for (std::size_t c = 0; c < cl.size(); ++c) {
      if (cl[c].size() >= cfg.s_max) continue;
      const Score s = score(k, mask[c], cl[c], v, cfg.epsilon);
      if (best < 0 || s.better(bs)) {
        best = static_cast<int>(c);
        bs = s;
      }
    }
    if (best < 0) {
      owner[v] = static_cast<int>(cl.size());
      cl.push_back({v});
      mask.emplace_back(n, false);
      mask.back()[v] = true;
    } else {
      add(static_cast<std::size_t>(best), v);
    }
  }
  return cl;
}

GridSystem build_grid_system(const KuramotoModel& km, const Clusters& clusters, const GridFilterSpec& spec,
                             const GridPrior& prior) {
  const std::size_t n = km.size();
  if (km.order != KuramotoOrder::Second) fail(ErrorKind::InvalidParams, "grid filters use the second-order model");
  std::vector<int> owner(n, -1);
  std::vector<std::size_t> local(n, 0);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (std::size_t a = 0; a < clusters[c].size(); ++a) {
      const std::size_t i = clusters[c][a];
      if (i >= n || owner[i] >= 0) fail(ErrorKind::InvalidParams, "clusters must be a disjoint cover");
      owner[i] = static_cast<int>(c);
      local[i] = a;
    }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end())
    fail(ErrorKind::InvalidParams, "clusters leave a bus unassigned");
  if (prior.theta.size() != static_cast<Eigen::Index>(n) || prior.omega.size() != static_cast<Eigen::Index>(n) ||
      prior.natural.size() != static_cast<Eigen::Index>(n))
    fail(ErrorKind::InvalidParams, "grid prior needs one entry per bus");

  GridSystem gs;
  gs.clusters = clusters;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& mem = clusters[c];
    const auto m = static_cast<Eigen::Index>(mem.size());
    const Eigen::Index dim = spec.augment ? 3 * m : 2 * m;
    Matrix kin(m, m);
    Vector d(m), fixed_nat(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      d(a) = km.damping(mem[a]);
      fixed_nat(a) = prior.natural(mem[a]);
      for (Eigen::Index b = 0; b < m; ++b) kin(a, b) = a == b ? 0.0 : km.k(mem[a], mem[b]);
    }
    const bool aug = spec.augment;
    const double inertia = km.inertia;
    StateSpaceModel model;
    model.state_dim = dim;
    model.input_dim = 2 * m;
    model.obs_dim = 2 * m;
    model.dt = spec.dt;
    model.integrator = IntegratorKind::Heun;
    model.derivative = [m, kin, d, fixed_nat, aug, inertia](const Vector& z, const Vector& u) {
      Vector out = Vector::Zero(z.size());
      const auto th = z.head(m);
      const auto om = z.segment(m, m);
      out.head(m) = om;
      for (Eigen::Index a = 0; a < m; ++a) {
        double acc = -d(a) * om(a) + (aug ? z(2 * m + a) : fixed_nat(a));
        for (Eigen::Index b = 0; b < m; ++b)
          if (kin(a, b) != 0.0) acc += kin(a, b) * std::sin(th(b) - th(a));
        acc += u(2 * a) * std::cos(th(a)) - u(2 * a + 1) * std::sin(th(a));
        out(m + a) = acc / inertia;
      }
      return out;
    };
    model.measurement = [m](const Vector& z, const Vector&) { return Vector(z.head(2 * m)); };
    Vector q(dim), p0(dim), mean(dim);
    for (Eigen::Index a = 0; a < m; ++a) {
      q(a) = spec.q_theta;
      q(m + a) = spec.q_omega;
      p0(a) = spec.p0_theta;
      p0(m + a) = spec.p0_omega;
      mean(a) = prior.theta(mem[a]);
      mean(m + a) = prior.omega(mem[a]);
      if (aug) {
        q(2 * m + a) = spec.q_natural;
        p0(2 * m + a) = spec.p0_natural;
        mean(2 * m + a) = prior.natural(mem[a]);
      }
      model.angle_states.push_back(a);
      model.angle_outputs.push_back(a);
    }
    model.q = q.asDiagonal();
    model.r = Matrix::Identity(2 * m, 2 * m) * spec.sigma * spec.sigma;
    SubsystemNode node;
    node.id = static_cast<int>(c);
    node.name = "C" + std::to_string(c + 1);
    node.model = std::move(model);
    node.estimator = spec.estimator;
    node.belief = GaussianBelief(mean, p0.asDiagonal());
    node.ukf = spec.ukf;
    node.wnls = spec.wnls;
    for (Eigen::Index a = 0; a < m; ++a) node.interface_selector.push_back(a);
    gs.nodes.push_back(std::move(node));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || owner[i] == owner[j] || km.k(i, j) == 0.0) continue;
      InterfaceEdge e;
      e.sender = owner[j];
      e.receiver = owner[i];
      e.law = std::make_shared<KuramotoCouplingLaw>(km.k(i, j));
      e.sender_selector = {static_cast<Eigen::Index>(local[j])};
      e.target_input_index = 2 * static_cast<Eigen::Index>(local[i]);
      e.label = "bus" + std::to_string(j + 1) + "->bus" + std::to_string(i + 1);
      gs.edges.push_back(std::move(e));
    }
  return gs;
}

// ================================================================ truth

TruthRun simulate_truth(const Derivative& f, const Measurement& h, const Vector& x0, long steps, double dt,
                        IntegratorKind integrator, const Matrix& inputs, const Vector& noise_std, Rng& rng,
                        const std::vector<Eigen::Index>& angle_states,
                        const std::vector<Eigen::Index>& angle_outputs) {
  if (steps <= 0 || !(dt > 0.0)) fail(ErrorKind::InvalidArgument, "simulate_truth needs T > 0, dt > 0");
  TruthRun out;
  out.states.resize(steps + 1, x0.size());
  Vector x = x0;
  wrap_states(x, angle_states);
  out.states.row(0) = x.transpose();
  Vector prev_f;
  bool have_prev = false;
  const Eigen::Index in_dim = inputs.cols();
  for (long n = 0; n < steps; ++n) {
    const Vector u = in_dim ? Vector(inputs.row(n).transpose()) : Vector();
    const StepResult r = integrate_step(integrator, f, x, u, dt, have_prev ? &prev_f : nullptr);
    prev_f = r.f;
    have_prev = true;
    x = r.next;
    wrap_states(x, angle_states);
    if (!x.allFinite()) fail(ErrorKind::NonFinite, "truth simulation diverged");
    out.states.row(n + 1) = x.transpose();
    if (h) {
      const Vector y = h(x, u);
      if (out.clean.size() == 0) {
        out.clean.resize(steps, y.size());
        out.measurements.resize(steps, y.size());
        if (noise_std.size() != y.size()) fail(ErrorKind::LengthMismatch, "noise_std length != obs dim");
      }
      out.clean.row(n) = y.transpose();
      Vector noisy = y;
      for (Eigen::Index k = 0; k < y.size(); ++k) noisy(k) += noise_std(k) * rng.normal();
      for (auto k : angle_outputs) noisy(k) = wrap_angle(noisy(k));
      out.measurements.row(n) = noisy.transpose();
    }
  }
  return out;
}

}  // namespace coinfer
