#include "cmi/nullquadric.hpp"

#include <cmath>

namespace cmi {

namespace {

cplx branch_sqrt(cplx w) {
  cplx r = std::sqrt(w);
  if (r.real() < 0.0 || (r.real() == 0.0 && r.imag() < 0.0)) r = -r;
  return r + cplx(0.0, 0.0);  // normalizes -0.0
}

double spinor_dot(const SpinorPair& p, const SpinorPair& q) {
  return (std::conj(p.a) * q.a + std::conj(p.b) * q.b).real();
}

double spinor_norm(const SpinorPair& p) { return std::sqrt(std::norm(p.a) + std::norm(p.b)); }

}  // namespace

const char* to_string(TangentFlow f) {
  switch (f) {
    case TangentFlow::rotation_12: return "rotation_12";
    case TangentFlow::rotation_13: return "rotation_13";
    case TangentFlow::rotation_23: return "rotation_23";
    case TangentFlow::scaling: return "scaling";
  }
  return "unknown";
}

double null_residual(const CVec3& z) { return std::abs(z(0) * z(0) + z(1) * z(1) + z(2) * z(2)); }

NullPoint spinor_to_null(const SpinorPair& s) {
  const cplx a2 = s.a * s.a;
  const cplx b2 = s.b * s.b;
  return NullPoint(a2 - b2, kI * (a2 + b2), 2.0 * s.a * s.b);
}

SpinorPair null_to_spinor(const NullPoint& z, double tol_null) {
  const double n2 = z.squaredNorm();
  if (n2 == 0.0) throw Error(ErrorCode::ZeroPoint, "null_to_spinor at the origin");
  if (null_residual(z) > tol_null * std::max(1.0, n2))
    throw Error(ErrorCode::NotOnQuadric, "null_to_spinor: point is off the quadric");
  const cplx a2 = 0.5 * (z(0) - kI * z(1));
  const cplx b2 = 0.5 * (-z(0) - kI * z(1));
  SpinorPair s{branch_sqrt(a2), 0.0};
  if (std::abs(s.a) > 1e-8 * std::sqrt(std::sqrt(n2))) {
    s.b = z(2) / (2.0 * s.a);
  } else {
    s.a = 0.0;
    s.b = branch_sqrt(b2);
  }
  return s;
}

std::pair<Vec3, Vec3> fiber_frame(const Vec3& xi) {
  const double n = xi.norm();
  if (n == 0.0) throw Error(ErrorCode::ZeroBase, "fiber_frame of the zero vector");
  const Vec3 u = xi / n;
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(u(i)) < std::abs(u(k))) k = i;
  Vec3 e = Vec3::Unit(k);
  Vec3 n1 = (e - e.dot(u) * u).normalized();
  Vec3 n2 = u.cross(n1);
  return {n1, n2};
}

NullPoint fiber_point(const Vec3& xi, double phi) {
  auto [n1, n2] = fiber_frame(xi);
  const Vec3 eta = xi.norm() * (std::cos(phi) * n1 + std::sin(phi) * n2);
  return xi.cast<cplx>() + kI * eta.cast<cplx>();
}

RealFiberPoint split(const NullPoint& z) { return {z.real(), z.imag()}; }

Eigen::Matrix3cd flow_matrix(TangentFlow field, cplx t) {
  Eigen::Matrix3cd m = Eigen::Matrix3cd::Identity();
  if (field == TangentFlow::scaling) return m * std::exp(t);
  int i = 0, j = 1;
  if (field == TangentFlow::rotation_13) j = 2;
  if (field == TangentFlow::rotation_23) i = 1, j = 2;
  const cplx c = std::cos(t), s = std::sin(t);
  m(i, i) = c;
  m(j, j) = c;
  m(i, j) = -s;
  m(j, i) = s;
  return m;
}

NullPoint flow(const NullPoint& z, TangentFlow field, cplx t) { return flow_matrix(field, t) * z; }

Eigen::Matrix3cd flow_generator(TangentFlow field) {
  if (field == TangentFlow::scaling) return Eigen::Matrix3cd::Identity();
  int i = 0, j = 1;
  if (field == TangentFlow::rotation_13) j = 2;
  if (field == TangentFlow::rotation_23) i = 1, j = 2;
  Eigen::Matrix3cd x = Eigen::Matrix3cd::Zero();
  x(i, j) = -1.0;
  x(j, i) = 1.0;
  return x;
}

CVec3 flow_field(const NullPoint& z, TangentFlow field) { return flow_generator(field) * z; }

SpinorLift lift_loop(const std::vector<CVec3>& samples, std::optional<SpinorPair> start,
                     double safety_angle) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "lift_loop of an empty loop");
  SpinorLift out;
  out.lift.reserve(samples.size() + 1);
  // Loop samples come from pipelines that already certify membership in A*,
  // so the quadric test here is loose; the continuation only needs the branch.
  const double tol = 1e-6;
  SpinorPair s0 = null_to_spinor(samples[0], tol);
  if (start && spinor_dot(*start, s0) < 0.0) s0 = {-s0.a, -s0.b};
  out.lift.push_back(s0);
  const double cos_safe = std::cos(safety_angle);
  const size_t n = samples.size();
  for (size_t k = 1; k <= n; ++k) {
    const SpinorPair& prev = out.lift.back();
    SpinorPair s = null_to_spinor(samples[k % n], tol);
    double d = spinor_dot(prev, s);
    if (d < 0.0) {
      s = {-s.a, -s.b};
      d = -d;
    }
    const double c = d / (spinor_norm(prev) * spinor_norm(s));
    const double ang = std::acos(std::min(1.0, c));
    out.max_step_angle = std::max(out.max_step_angle, ang);
    if (c < cos_safe)
      throw Error(ErrorCode::UndersampledLoop,
                  "spinor lift jumps by " + std::to_string(ang) + " rad at sample " + std::to_string(k));
    out.lift.push_back(s);
  }
  out.closes = spinor_dot(out.lift.front(), out.lift.back()) > 0.0;
  return out;
}

int pi1_class(const std::vector<CVec3>& samples, double safety_angle) {
  for (const auto& z : samples) {
    if (z.squaredNorm() == 0.0) throw Error(ErrorCode::ZeroPoint, "pi1_class: loop meets the origin");
  }
  return lift_loop(samples, std::nullopt, safety_angle).closes ? 0 : 1;
}

int pi1_class(const PeriodicPath& loop, double safety_angle) {
  return pi1_class(loop.samples(), safety_angle);
}

}  // namespace cmi
