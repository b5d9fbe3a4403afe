#pragma once

#include <string>
#include <vector>

#include "cmi/loops.hpp"
#include "cmi/riemann.hpp"
#include "cmi/sprays.hpp"
#include "cmi/weierstrass.hpp"

namespace cmi {

// Conformal minimal immersion u(z) = value + Re int_{basepoint}^z F dz with F in spinor form.
struct SpinorImmersion {
  SpinorMap map;
  cplx basepoint = 1.0;
  Vec3 value = Vec3::Zero();

  MinimalImmersion immersion(double tol_period = 1e-9) const;
};

// Catalog entry converted to spinor form; the conversion is exact for the polynomial entries.
SpinorImmersion spinor_catalog(const std::string& name);

struct NullCurve {
  SpinorMap map;
  cplx basepoint = 1.0;
  CVec3 value = CVec3::Zero();  // real part u(basepoint), imaginary part 0

  CVec3 operator()(cplx z) const;
};

struct VerificationReport {
  int n_r = 0;
  int n_theta = 0;
  double max_conformality = 0.0;
  double max_real_period = 0.0;
  std::vector<std::vector<Vec3>> flux;  // [t][generator]
  double min_metric = 0.0;
  std::vector<bool> flat;               // per t
  std::vector<std::vector<int>> pi1;    // [t][generator]
  double null_curve_period = 0.0;       // max |complex period| at the last t
  double tol_conf = 1e-10;
  double tol_period = 1e-9;
  bool conformality_ok = true;
  bool periods_ok = true;
  bool metric_ok = true;
  bool nonflat_ok = true;

  bool ok() const { return conformality_ok && periods_ok && metric_ok; }
};

struct ImmersionFamily {
  std::vector<double> t;
  std::vector<SpinorMap> maps;
  cplx basepoint = 1.0;
  Vec3 value = Vec3::Zero();
  std::vector<Vec3> target;  // flux at t = 1 per generator
  bool constant = false;
  std::string notice;
  int degree = 0;
  std::vector<double> control_norm;  // |w(t)| of the period correction
  double max_runge_error = 0.0;

  SpinorImmersion member(size_t k) const { return {maps[k], basepoint, value}; }
  NullCurve null_curve() const;
};

struct IsotopyOptions {
  int n_t = 64;
  int n_s = 1024;
  Segment fixed{0.0, 0.05};
  Segment nonflat_on{0.06, 0.26};
  Tolerances tol;
  SprayOptions spray;
  SolveOptions solve;
  RungeOptions runge;
  PeriodIsotopyOptions loops;
};

ImmersionFamily flux_to_zero(const SpinorImmersion& u0, const IsotopyOptions& opt = {});
ImmersionFamily prescribe_flux(const SpinorImmersion& u0, const std::vector<Vec3>& p, const IsotopyOptions& opt = {});

// Residuals recomputed on an n_r x n_theta grid.
VerificationReport verify(const ImmersionFamily& f, int n_r = 128, int n_theta = 512, const Tolerances& tol = {});

}  // namespace cmi
