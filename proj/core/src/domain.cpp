#include "cmi/domain.hpp"

#include <cmath>
#include <string>

namespace cmi {

CircularDomain::CircularDomain(Disk outer_, std::vector<Disk> holes_) : outer(outer_), holes(std::move(holes_)) {
  if (!(outer.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "outer radius must be positive");
  for (size_t i = 0; i < holes.size(); ++i) {
    const Disk& h = holes[i];
    if (!(h.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "hole radius must be positive");
    if (std::abs(h.center - outer.center) + h.radius >= outer.radius)
      throw Error(ErrorCode::InvalidArgument, "hole " + std::to_string(i) + " is not inside the outer disk");
    for (size_t j = 0; j < i; ++j)
      if (std::abs(h.center - holes[j].center) <= h.radius + holes[j].radius)
        throw Error(ErrorCode::InvalidArgument,
                    "holes " + std::to_string(j) + " and " + std::to_string(i) + " intersect");
  }
}

CircularDomain CircularDomain::annulus(double r_in, double r_out, cplx center) {
  if (!(r_in > 0.0 && r_in < r_out)) throw Error(ErrorCode::InvalidArgument, "annulus needs 0 < r_in < r_out");
  return CircularDomain({center, r_out}, {{center, r_in}});
}

double CircularDomain::clearance(cplx z) const {
  double c = outer.radius - std::abs(z - outer.center);
  for (const auto& h : holes) c = std::min(c, std::abs(z - h.center) - h.radius);
  return c;
}

bool CircularDomain::contains(cplx z) const { return clearance(z) > 0.0; }

std::vector<CurveChart> homology_basis(const CircularDomain& d) {
  std::vector<CurveChart> out;
  for (size_t j = 0; j < d.holes.size(); ++j) {
    const Disk& h = d.holes[j];
    double big = d.outer.radius - std::abs(h.center - d.outer.center);
    for (size_t i = 0; i < d.holes.size(); ++i) {
      if (i == j) continue;
      const Disk& o = d.holes[i];
      const double gap = std::abs(h.center - o.center) - o.radius - h.radius;
      big = std::min(big, h.radius + 0.5 * gap);
    }
    if (!(big > h.radius * (1.0 + 1e-9)))
      throw Error(ErrorCode::NoClearance, "no room for a curve around hole " + std::to_string(j));
    out.push_back({h.center, std::sqrt(h.radius * big), static_cast<int>(j)});
  }
  for (size_t i = 0; i < out.size(); ++i)
    for (size_t j = 0; j < i; ++j)
      if (std::abs(out[i].center - out[j].center) <= out[i].radius + out[j].radius)
        throw Error(ErrorCode::NoClearance,
                    "curves around holes " + std::to_string(j) + " and " + std::to_string(i) + " meet");
  return out;
}

std::vector<cplx> verification_grid(const CircularDomain& d, int n_r, int n_theta, double margin) {
  if (n_r < 1 || n_theta < 1) throw Error(ErrorCode::InvalidArgument, "grid needs positive sizes");
  // radial range: for a concentric annulus start at the hole, else at the center
  double r0 = 0.0;
  if (d.holes.size() == 1 && d.holes[0].center == d.outer.center) r0 = d.holes[0].radius;
  const double r1 = d.outer.radius;
  std::vector<cplx> pts;
  pts.reserve(static_cast<size_t>(n_r) * static_cast<size_t>(n_theta));
  for (int i = 0; i < n_r; ++i) {
    const double r = r0 + (r1 - r0) * (i + 0.5) / n_r;
    for (int k = 0; k < n_theta; ++k) {
      const cplx z = d.outer.center + std::polar(r, kTwoPi * (k + 0.5) / n_theta);
      if (d.clearance(z) > margin) pts.push_back(z);
    }
  }
  return pts;
}

int winding_number(const CurveChart& c, cplx p, int n) {
  cplx acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) / n;
    acc += c.dz(x) / (c.z(x) - p);
  }
  acc /= static_cast<double>(n);
  return static_cast<int>(std::lround(acc.imag() / kTwoPi));
}

}  // namespace cmi
