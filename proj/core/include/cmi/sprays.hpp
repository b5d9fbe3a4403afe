#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cmi/loops.hpp"
#include "cmi/nullquadric.hpp"
#include "cmi/periodic_path.hpp"

namespace cmi {

// One complex control: the flow of `field` run for time w h(x), h a truncated Gaussian.
struct SprayControl {
  int curve = 0;
  TangentFlow field = TangentFlow::scaling;
  double center = 0.0;
  double sd = 0.04;

  double bump(double x) const;
  // Support [center - cut sd, center + cut sd] as a segment.
  Segment support() const;
};

class LoopSpray {
 public:
  std::vector<std::vector<PeriodicPath>> base;  // [t][curve]
  std::vector<SprayControl> controls;
  // Controls act as g -> e^{w h} g with the third component untouched.
  bool fixed_third = false;
  double radius_w = 0.5;

  int n_t() const { return static_cast<int>(base.size()); }
  int n_curves() const { return base.empty() ? 0 : static_cast<int>(base.front().size()); }
  int dim_w() const { return static_cast<int>(controls.size()); }
  // Period components per curve: 3, or 2 with a fixed third component.
  int rows_per_curve() const { return fixed_third ? 2 : 3; }

  // sigma_{t,w}; samples outside every support are copied.
  std::vector<PeriodicPath> apply(int t, const Eigen::VectorXcd& w) const;
  std::vector<CVec3> periods(int t, const Eigen::VectorXcd& w) const;
};

struct SprayOptions {
  double bump_std = 0.04;
  double sigma_min_threshold = 1e-4;
  int max_retries = 5;
  double radius_w = 0.5;
};

// Three scaling controls per curve inside its segment; certifies the period Jacobian at w = 0.
LoopSpray build_spray(const std::vector<std::vector<PeriodicPath>>& sigma_t, const std::vector<Segment>& segments,
                      const SprayOptions& opt = {});
// As build_spray, deforming only (sigma_1, sigma_2) through the Gauss map.
LoopSpray build_spray_fixed_third(const std::vector<std::vector<PeriodicPath>>& sigma_t,
                                  const std::vector<Segment>& segments, const SprayOptions& opt = {});

// d periods / d w by central differences with step 1e-5 radius_w, rows curve-major.
Eigen::MatrixXcd period_jacobian(const LoopSpray& s, int t, const Eigen::VectorXcd& w = {});

double smallest_singular_value(const Eigen::MatrixXcd& m);

using PeriodTargets = std::vector<std::vector<CVec3>>;  // [t][curve]
// Periods of whatever the sprayed loops are turned into; defaults to the loop periods.
using PeriodMap = std::function<std::vector<CVec3>(int t, const std::vector<PeriodicPath>& loops)>;

struct SolveOptions {
  double tol_period = 1e-9;
  int max_iterations = 25;
  int max_halvings = 10;
  double tikhonov = 1e-12;
};

struct SolveResult {
  std::vector<Eigen::VectorXcd> w;  // per t
  std::vector<double> residual;     // per t
  double max_w = 0.0;
  int newton_iterations = 0;
};

SolveResult solve_w(const LoopSpray& s, const PeriodTargets& targets, const SolveOptions& opt = {},
                    const PeriodMap& realize = nullptr);

}  // namespace cmi
