#pragma once

#include <array>
#include <string>

#include "coinfer/interface_laws.hpp"
#include "coinfer/numerics.hpp"

namespace coinfer {

struct SindyConfig {
  double threshold = 1.0;
  int max_iters = 20;
  bool normalize_columns = true;
  double highpass_cutoff = 0.05;  // Hz, <= 0 disables
  double dt = 1e-3;
  // Give the target two high-pass passes and dv one more, so every signal in
  // the regression carries the same filter phase as the twice-filtered dx.
  bool consistent_filtering = false;
};

inline const std::array<std::string, 6> kLibraryColumns = {"dx", "dv", "dx^3", "|dv|dv", "dx*dv", "1"};

// n x 6, columns in kLibraryColumns order.
using LibraryMatrix = Matrix;

Vector trapezoid_integral(const Vector& a, double dt);
// Single-pole bilinear high-pass, y[0] = 0.
Vector highpass(const Vector& x, double dt, double cutoff_hz);

struct Kinematics {
  Vector displacement;
  Vector velocity;
};

Kinematics reconstruct_kinematics(const Vector& accel, double dt, double cutoff_hz);

LibraryMatrix build_library(const Vector& dx, const Vector& dv);

Vector stlsq(const LibraryMatrix& theta, const Vector& target, const SindyConfig& config);

// dx, dv are sender minus receiver; force is the law output on the receiver.
LearnedLaw fit_interface_law(const Vector& accel_sender, const Vector& accel_receiver, const Vector& force,
                             const SindyConfig& config);

}  // namespace coinfer
