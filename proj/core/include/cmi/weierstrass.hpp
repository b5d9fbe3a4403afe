#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cmi/common.hpp"
#include "cmi/domain.hpp"
#include "cmi/laurent.hpp"
#include "cmi/nullquadric.hpp"

namespace cmi {

// Coefficient F of a C^3-valued holomorphic 1-form F dz (F = f theta / dz).
using HoloForm = std::function<CVec3(cplx)>;

struct WeierstrassData {
  HoloFunction g;
  HoloFunction f3;
  HoloFunction theta = HoloFunction::constant(1.0);  // theta = theta(z) dz

  CVec3 f(cplx z) const;
  CVec3 form(cplx z) const;
  HoloForm as_form() const;
};

// (1/2 (1/g - g), i/2 (1/g + g), 1) f3
NullPoint assemble_f(cplx g, cplx f3);
// f on the grid; GaussMapVanishes if min |g| drops below g_min.
std::vector<CVec3> assemble_f(const WeierstrassData& d, const std::vector<cplx>& grid, double g_min = 1e-10);

// f3 / (f1 - i f2)
cplx gauss_map(const CVec3& f);
// DegenerateDenominator if |f1 - i f2| < rel_threshold |f| on more than 1% of the samples.
std::vector<cplx> gauss_map(const std::vector<CVec3>& f, double rel_threshold = 1e-10);

// 1/2 |f theta / dz|^2
double metric_density(const WeierstrassData& d, cplx z);
double metric_density(const HoloForm& form, cplx z);
// 1/4 (1/|g| + |g|)^2 |f3|^2 |theta / dz|^2
double metric_density_from_gauss(cplx g, cplx f3, cplx theta);

// Complex period of F dz over the chart, trapezoid rule refined until it settles.
CVec3 loop_period(const HoloForm& form, const CurveChart& c, double tol = 1e-14);
Vec3 flux(const HoloForm& form, const CurveChart& c);
Vec3 flux(const WeierstrassData& d, const CurveChart& c);

// Piece of an integration path, parametrized over [0, 1].
struct PathPiece {
  std::function<cplx(double)> z;
  std::function<cplx(double)> dz;

  static PathPiece line(cplx a, cplx b);
  static PathPiece arc(cplx center, double radius, double phi0, double phi1);
};

// Radial segments and arcs about the outer center from a to b.
std::vector<PathPiece> default_path(const CircularDomain& d, cplx a, cplx b);

// value + int_path Re(F dz). RealPeriodNonzero if a generator has real period above tol_period.
Vec3 integrate_immersion(const HoloForm& form, const std::vector<CurveChart>& generators, cplx basepoint,
                         const Vec3& value, cplx target, const std::vector<PathPiece>& path,
                         double tol_period = 1e-9);

// max |f1^2 + f2^2 + f3^2| / |f|^2 over the samples
double conformality_residual(const std::vector<CVec3>& f);
double conformality_residual(const HoloForm& form, const std::vector<cplx>& grid);

struct FlatCheck {
  bool flat = false;
  CVec3 ray = CVec3::Zero();  // scaled so its largest component (last on ties) is 1
  double ratio = 0.0;         // sigma_2 / sigma_1
};

FlatCheck is_flat(const std::vector<CVec3>& f, double rel_threshold = 1e-8);
FlatCheck is_flat(const WeierstrassData& d, const std::vector<cplx>& grid, double rel_threshold = 1e-8);

CircularDomain default_annulus();
std::vector<std::string> catalog_names();
// catenoid, enneper_annulus, flat_exponential, vertical_plane on the default annulus.
WeierstrassData catalog(const std::string& name);

struct MinimalImmersion {
  HoloForm form;
  CircularDomain domain;
  cplx basepoint = 1.0;
  Vec3 value = Vec3::Zero();
  std::vector<CurveChart> generators;
  std::vector<Vec3> flux;

  Vec3 operator()(cplx z) const;
};

// Checks real periods and metric positivity on the verification grid.
MinimalImmersion make_immersion(const HoloForm& form, const CircularDomain& d, cplx basepoint,
                                const Vec3& value, double tol_period = 1e-9);

}  // namespace cmi
