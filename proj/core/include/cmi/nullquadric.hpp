#pragma once

#include <array>
#include <optional>
#include <vector>

#include "cmi/common.hpp"
#include "cmi/periodic_path.hpp"

namespace cmi {

using NullPoint = CVec3;

// (a, b) -> (a^2 - b^2, i(a^2 + b^2), 2ab).
struct SpinorPair {
  cplx a;
  cplx b;
};

struct RealFiberPoint {
  Vec3 xi;
  Vec3 eta;
};

enum class TangentFlow { rotation_12, rotation_13, rotation_23, scaling };

inline constexpr std::array<TangentFlow, 4> kAllFlows = {
    TangentFlow::rotation_12, TangentFlow::rotation_13, TangentFlow::rotation_23,
    TangentFlow::scaling};

const char* to_string(TangentFlow f);

double null_residual(const CVec3& z);

NullPoint spinor_to_null(const SpinorPair& s);

// Branch: Re a >= 0, ties broken by Im a >= 0.
SpinorPair null_to_spinor(const NullPoint& z, double tol_null = 1e-10);

// Orthonormal frame (n1, n2) of xi^perp, Gram-Schmidt from the standard basis
// vector least aligned with xi (lowest index on ties), n2 = xi_hat x n1.
std::pair<Vec3, Vec3> fiber_frame(const Vec3& xi);

NullPoint fiber_point(const Vec3& xi, double phi);

RealFiberPoint split(const NullPoint& z);

Eigen::Matrix3cd flow_matrix(TangentFlow field, cplx t);

// X with flow_matrix(field, t) = exp(t X).
Eigen::Matrix3cd flow_generator(TangentFlow field);

NullPoint flow(const NullPoint& z, TangentFlow field, cplx t);

// Value of the vector field generating `field` at z.
CVec3 flow_field(const NullPoint& z, TangentFlow field);

struct SpinorLift {
  // samples.size() + 1 entries; the last one continues the lift back to x = 1.
  std::vector<SpinorPair> lift;
  bool closes = true;
  double max_step_angle = 0.0;
};

// Sign continuation of the spinor lift along a closed sampled loop.
SpinorLift lift_loop(const std::vector<CVec3>& samples,
                     std::optional<SpinorPair> start = std::nullopt,
                     double safety_angle = kPi / 3.0);

int pi1_class(const std::vector<CVec3>& samples, double safety_angle = kPi / 3.0);
int pi1_class(const PeriodicPath& loop, double safety_angle = kPi / 3.0);

}  // namespace cmi
