#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "coinfer/numerics.hpp"

namespace coinfer {

struct SpringDamperLaw {
  double k = 0.0;
  double c = 0.0;
  double sign = 1.0;
};

// s = [x, xdot]; returns sign * (k dx + c dxdot) with d = sender - receiver.
double eval_spring_damper(const SpringDamperLaw& law, const Vector& s_sender, const Vector& s_receiver);

// [k c] (P_s1 + P_s2) [k c]^T, cross-covariances neglected. Negative round-off
// is clamped to zero with a warning.
double interface_force_variance(const Matrix& p_s1, const Matrix& p_s2, double k, double c);

class VarianceTracker {
 public:
  explicit VarianceTracker(std::size_t edges = 0) : last_(edges, 0.0) {}
  void resize(std::size_t edges) { last_.assign(edges, 0.0); }
  double last(std::size_t edge) const { return last_.at(edge); }
  // max(0, current - last); stores current.
  double incremental(std::size_t edge, double current);

 private:
  std::vector<double> last_;
};

double incremental_variance(VarianceTracker& tracker, std::size_t edge, double current_var);

// q with q[t,t] += (dt/mass)^2 var_used.
Matrix inject_process_noise(const Matrix& q, double var_used, double dt, double mass, Eigen::Index target_index);

// Column order [dx, dv, dx^3, |dv| dv, dx dv, 1].
struct LearnedLaw {
  std::array<double, 6> xi{};

  double k() const { return xi[0]; }
  double c() const { return xi[1]; }
};

double eval_learned_law(const LearnedLaw& law, double dx, double dv);
// d F / d(dx), d F / d(dv)
std::array<double, 2> learned_law_gradient(const LearnedLaw& law, double dx, double dv);

void write_learned_law(std::ostream& os, const LearnedLaw& law);
LearnedLaw read_learned_law(std::istream& is);
void save_learned_law(const std::string& path, const LearnedLaw& law);
LearnedLaw load_learned_law(const std::string& path);

// Edge law consumed by graph schedules. Outputs are added to the receiver's
// input vector; the linearisation drives variance propagation.
class InterfaceLaw {
 public:
  virtual ~InterfaceLaw() = default;
  virtual std::string name() const = 0;
  virtual Eigen::Index sender_dim() const = 0;
  virtual Eigen::Index receiver_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Vector eval(const Vector& s_sender, const Vector& s_receiver) const = 0;
  virtual Matrix jacobian_sender(const Vector& s_sender, const Vector& s_receiver) const;
  virtual Matrix jacobian_receiver(const Vector& s_sender, const Vector& s_receiver) const;

  // J_s P_s J_s^T + J_r P_r J_r^T for a scalar output.
  double variance(const Vector& s_sender, const Matrix& p_sender, const Vector& s_receiver,
                  const Matrix& p_receiver) const;
};

using LawPtr = std::shared_ptr<const InterfaceLaw>;

class SpringDamperEdgeLaw final : public InterfaceLaw {
 public:
  explicit SpringDamperEdgeLaw(SpringDamperLaw law) : law_(law) {}
  std::string name() const override { return "spring-damper"; }
  Eigen::Index sender_dim() const override { return 2; }
  Eigen::Index receiver_dim() const override { return 2; }
  Eigen::Index output_dim() const override { return 1; }
  Vector eval(const Vector& s, const Vector& r) const override;
  Matrix jacobian_sender(const Vector& s, const Vector& r) const override;
  Matrix jacobian_receiver(const Vector& s, const Vector& r) const override;
  const SpringDamperLaw& params() const { return law_; }

 private:
  SpringDamperLaw law_;
};

// reaction = true gives the opposite end of the same interface:
// -sign * law(r - s), exact action-reaction for even library terms too.
class LearnedEdgeLaw final : public InterfaceLaw {
 public:
  explicit LearnedEdgeLaw(LearnedLaw law, double sign = 1.0, bool reaction = false)
      : law_(law), sign_(sign), reaction_(reaction) {}
  std::string name() const override { return "learned"; }
  Eigen::Index sender_dim() const override { return 2; }
  Eigen::Index receiver_dim() const override { return 2; }
  Eigen::Index output_dim() const override { return 1; }
  Vector eval(const Vector& s, const Vector& r) const override;
  Matrix jacobian_sender(const Vector& s, const Vector& r) const override;
  Matrix jacobian_receiver(const Vector& s, const Vector& r) const override;
  const LearnedLaw& params() const { return law_; }

 private:
  LearnedLaw law_;
  double sign_;
  bool reaction_;
};

// Sends [K sin(theta_j), K cos(theta_j)] so a receiver bus a can form
// K sin(theta_j - theta_a) = u0 cos(theta_a) - u1 sin(theta_a) on its own
// sigma points.
class KuramotoCouplingLaw final : public InterfaceLaw {
 public:
  explicit KuramotoCouplingLaw(double k) : k_(k) {}
  std::string name() const override { return "kuramoto"; }
  Eigen::Index sender_dim() const override { return 1; }
  Eigen::Index receiver_dim() const override { return 0; }
  Eigen::Index output_dim() const override { return 2; }
  Vector eval(const Vector& s, const Vector& r) const override;
  Matrix jacobian_sender(const Vector& s, const Vector& r) const override;
  double strength() const { return k_; }

 private:
  double k_;
};

}  // namespace coinfer
