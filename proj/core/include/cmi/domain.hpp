#pragma once

#include <vector>

#include "cmi/common.hpp"

namespace cmi {

struct Disk {
  cplx center = 0.0;
  double radius = 1.0;
};

// Open outer disk minus pairwise disjoint closed disks.
struct CircularDomain {
  Disk outer;
  std::vector<Disk> holes;

  CircularDomain() = default;
  CircularDomain(Disk outer_, std::vector<Disk> holes_);
  static CircularDomain annulus(double r_in, double r_out, cplx center = 0.0);

  int rank() const { return static_cast<int>(holes.size()); }
  bool contains(cplx z) const;
  // Distance from z to the complement of the domain.
  double clearance(cplx z) const;
};

// Positively oriented circle |z - center| = radius, parametrized by x in R/Z.
struct CurveChart {
  cplx center = 0.0;
  double radius = 1.0;
  int hole = -1;  // index of the enclosed hole

  cplx z(double x) const { return center + radius * std::polar(1.0, kTwoPi * x); }
  cplx dz(double x) const { return kI * kTwoPi * radius * std::polar(1.0, kTwoPi * x); }
};

// One circle per hole at the conformal midpoint sqrt(rho R) of the free annulus around it.
std::vector<CurveChart> homology_basis(const CircularDomain& d);

// Points of the domain at polar cell centers about the outer center; points inside holes
// or within `margin` of the boundary are dropped.
std::vector<cplx> verification_grid(const CircularDomain& d, int n_r = 64, int n_theta = 256, double margin = 0.0);

// Winding number of a chart around a point, by the argument principle.
int winding_number(const CurveChart& c, cplx p, int n = 512);

}  // namespace cmi
