#include "coinfer/interface_laws.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "coinfer/error.hpp"

namespace coinfer {

namespace {

void require_len(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) fail(ErrorKind::LengthMismatch, std::string(what) + ": expected length " + std::to_string(n));
}

double clamp_variance(double v) {
  if (v < 0.0) {
    spdlog::warn("negative interface variance {:.3e} clamped to zero", v);
    return 0.0;
  }
  return v;
}

}  // namespace

double eval_spring_damper(const SpringDamperLaw& law, const Vector& s_sender, const Vector& s_receiver) {
  require_len(s_sender, 2, "eval_spring_damper sender");
  require_len(s_receiver, 2, "eval_spring_damper receiver");
  return law.sign * (law.k * (s_sender(0) - s_receiver(0)) + law.c * (s_sender(1) - s_receiver(1)));
}

double interface_force_variance(const Matrix& p_s1, const Matrix& p_s2, double k, double c) {
  if (p_s1.rows() != 2 || p_s1.cols() != 2 || p_s2.rows() != 2 || p_s2.cols() != 2)
    fail(ErrorKind::LengthMismatch, "interface_force_variance expects 2x2 blocks");
  Eigen::Vector2d a(k, c);
  const Eigen::Matrix2d s = p_s1 + p_s2;
  return clamp_variance(a.dot(s * a));
}

double VarianceTracker::incremental(std::size_t edge, double current) {
  if (edge >= last_.size()) fail(ErrorKind::IndexOutOfRange, "VarianceTracker edge index");
  if (current < 0.0) fail(ErrorKind::InvalidArgument, "incremental_variance: negative variance");
  const double inc = std::max(0.0, current - last_[edge]);
  last_[edge] = current;
  return inc;
}

double incremental_variance(VarianceTracker& tracker, std::size_t edge, double current_var) {
  return tracker.incremental(edge, current_var);
}

Matrix inject_process_noise(const Matrix& q, double var_used, double dt, double mass, Eigen::Index target_index) {
  if (target_index < 0 || target_index >= q.rows() || q.rows() != q.cols())
    fail(ErrorKind::IndexOutOfRange, "inject_process_noise target index");
  if (!(mass > 0.0) || !(dt > 0.0)) fail(ErrorKind::InvalidArgument, "inject_process_noise needs dt, mass > 0");
  if (var_used < 0.0) fail(ErrorKind::InvalidArgument, "inject_process_noise: negative variance");
  Matrix out = q;
  const double g = dt / mass;
  out(target_index, target_index) += g * g * var_used;
  return out;
}

double eval_learned_law(const LearnedLaw& law, double dx, double dv) {
  const auto& x = law.xi;
  return x[0] * dx + x[1] * dv + x[2] * dx * dx * dx + x[3] * std::abs(dv) * dv + x[4] * dx * dv + x[5];
}

std::array<double, 2> learned_law_gradient(const LearnedLaw& law, double dx, double dv) {
  const auto& x = law.xi;
  return {x[0] + 3.0 * x[2] * dx * dx + x[4] * dv, x[1] + 2.0 * x[3] * std::abs(dv) + x[4] * dx};
}

void write_learned_law(std::ostream& os, const LearnedLaw& law) {
  os << std::setprecision(17);
  for (double v : law.xi) os << v << '\n';
}

LearnedLaw read_learned_law(std::istream& is) {
  LearnedLaw law;
  std::size_t n = 0;
  std::string tok;
  while (is >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(is, rest);
      continue;
    }
    if (n >= law.xi.size()) fail(ErrorKind::ParseError, "learned law: more than 6 coefficients");
    try {
      std::size_t used = 0;
      law.xi[n] = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      fail(ErrorKind::ParseError, "learned law: bad coefficient '" + tok + "'");
    }
    if (!std::isfinite(law.xi[n])) fail(ErrorKind::ParseError, "learned law: non-finite coefficient");
    ++n;
  }
  if (n != law.xi.size()) fail(ErrorKind::ParseError, "learned law: expected 6 coefficients, got " + std::to_string(n));
  return law;
}

void save_learned_law(const std::string& path, const LearnedLaw& law) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot write " + path);
  write_learned_law(f, law);
}

LearnedLaw load_learned_law(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot read " + path);
  return read_learned_law(f);
}

// Central differences; laws override where closed forms exist.
Matrix InterfaceLaw::jacobian_sender(const Vector& s, const Vector& r) const {
  Matrix j(output_dim(), s.size());
  Vector sp = s;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(s(i)));
    sp(i) = s(i) + h;
    const Vector fp = eval(sp, r);
    sp(i) = s(i) - h;
    const Vector fm = eval(sp, r);
    sp(i) = s(i);
    j.col(i) = (fp - fm) / (2.0 * h);
  }
  return j;
}

Matrix InterfaceLaw::jacobian_receiver(const Vector& s, const Vector& r) const {
  Matrix j(output_dim(), r.size());
  Vector rp = r;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(r(i)));
    rp(i) = r(i) + h;
    const Vector fp = eval(s, rp);
    rp(i) = r(i) - h;
    const Vector fm = eval(s, rp);
    rp(i) = r(i);
    j.col(i) = (fp - fm) / (2.0 * h);
  }
  return j;
}

double InterfaceLaw::variance(const Vector& s, const Matrix& ps, const Vector& r, const Matrix& pr) const {
  if (output_dim() != 1) fail(ErrorKind::InvalidArgument, name() + ": variance defined for scalar laws only");
  const Matrix js = jacobian_sender(s, r);
  double v = (js * ps * js.transpose())(0, 0);
  if (r.size() > 0) {
    const Matrix jr = jacobian_receiver(s, r);
    v += (jr * pr * jr.transpose())(0, 0);
  }
  return clamp_variance(v);
}

Vector SpringDamperEdgeLaw::eval(const Vector& s, const Vector& r) const {
  Vector out(1);
  out(0) = eval_spring_damper(law_, s, r);
  return out;
}

Matrix SpringDamperEdgeLaw::jacobian_sender(const Vector&, const Vector&) const {
  Matrix j(1, 2);
  j << law_.sign * law_.k, law_.sign * law_.c;
  return j;
}

Matrix SpringDamperEdgeLaw::jacobian_receiver(const Vector&, const Vector&) const {
  Matrix j(1, 2);
  j << -law_.sign * law_.k, -law_.sign * law_.c;
  return j;
}

Vector LearnedEdgeLaw::eval(const Vector& s, const Vector& r) const {
  require_len(s, 2, "learned law sender");
  require_len(r, 2, "learned law receiver");
  Vector out(1);
  if (reaction_)
    out(0) = -sign_ * eval_learned_law(law_, r(0) - s(0), r(1) - s(1));
  else
    out(0) = sign_ * eval_learned_law(law_, s(0) - r(0), s(1) - r(1));
  return out;
}

Matrix LearnedEdgeLaw::jacobian_sender(const Vector& s, const Vector& r) const {
  Matrix j(1, 2);
  if (reaction_) {
    const auto g = learned_law_gradient(law_, r(0) - s(0), r(1) - s(1));
    j << sign_ * g[0], sign_ * g[1];
  } else {
    const auto g = learned_law_gradient(law_, s(0) - r(0), s(1) - r(1));
    j << sign_ * g[0], sign_ * g[1];
  }
  return j;
}

Matrix LearnedEdgeLaw::jacobian_receiver(const Vector& s, const Vector& r) const {
  return -jacobian_sender(s, r);
}

Vector KuramotoCouplingLaw::eval(const Vector& s, const Vector&) const {
  require_len(s, 1, "kuramoto sender");
  Vector out(2);
  out << k_ * std::sin(s(0)), k_ * std::cos(s(0));
  return out;
}

Matrix KuramotoCouplingLaw::jacobian_sender(const Vector& s, const Vector&) const {
  Matrix j(2, 1);
  j << k_ * std::cos(s(0)), -k_ * std::sin(s(0));
  return j;
}

}  // namespace coinfer
