#pragma once

#include <vector>

#include "cmi/domain.hpp"
#include "cmi/laurent.hpp"
#include "cmi/periodic_path.hpp"
#include "cmi/weierstrass.hpp"

namespace cmi {

// F = q^2 (A^2 - B^2, i (A^2 + B^2), 2 A B) with q^2 = prod_j (z - c_j)^{tag_j},
// the dz-coefficient of a holomorphic 1-form with values in the null quadric.
struct SpinorMap {
  CircularDomain domain;
  std::vector<int> tags;  // 0 or 1 per hole
  HoloFunction A;
  HoloFunction B;

  cplx q2(cplx z) const;
  CVec3 operator()(cplx z) const;
  HoloForm as_form() const;
  int degree() const { return std::max(A.degree(), B.degree()); }
};

// Parity tag of a hole whose boundary loop has the given pi1 class.
inline int tag_for_class(int pi1) { return (pi1 + 1) % 2; }

// sigma(x_k) = F(z(x_k)) dz/dx at n samples of the chart.
PeriodicPath restrict_to_curve(const HoloForm& form, const CurveChart& c, int n = 1024);

struct RungeOptions {
  int min_degree = 16;
  int max_degree = 512;
  double tol = 1e-6;  // sup error on the curves relative to the largest loop value
  int grid_r = 64;
  double min_modulus_rel = 1e-14;
  // Skips the nonvanishing check on the grid (min_modulus is then left at 0).
  bool check_grid = true;
};

struct RungeResult {
  SpinorMap map;
  std::vector<double> sup_error;  // relative, per curve
  int degree = 0;
  double min_modulus = 0.0;       // min |F| / max |F| on the check grid
  double max_null_residual = 0.0;
};

// Extends loops given on the homology basis curves to a null map on the domain by fitting
// truncated Laurent blocks to spinor lifts. With a reference map, the sign of each lift is chosen
// to stay close to it, so a family stays continuous. With a base map, only the difference of the
// spinors from the base is fitted and added to it; loops equal to the base restriction give the base.
RungeResult runge_extend(const std::vector<PeriodicPath>& loops, const CircularDomain& d,
                         const std::vector<CurveChart>& charts, const SpinorMap* reference = nullptr,
                         const RungeOptions& opt = {}, const SpinorMap* base = nullptr);

// Spinor form of a global map, via its restrictions to the homology basis.
RungeResult spinor_form(const HoloForm& form, const CircularDomain& d, int n = 1024, const RungeOptions& opt = {});

}  // namespace cmi
