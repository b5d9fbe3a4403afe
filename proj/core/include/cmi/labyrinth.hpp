#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cmi/domain.hpp"
#include "cmi/isotopy.hpp"
#include "cmi/laurent.hpp"
#include "cmi/riemann.hpp"

namespace cmi {

// End O_j = {r_core <= |z_j| <= r_end} of the domain in its chart z_j. The outer end uses
// z_j = z - c, a hole end z_j = rho R / (z - c_j), so both boundaries sit at |z_j| = R.
struct EndChart {
  int hole = -1;  // -1 for the outer boundary
  cplx center = 0.0;
  double scale = 1.0;
  double r_core = 0.0;
  double r_end = 0.0;

  cplx to_chart(cplx z) const;
  cplx from_chart(cplx w) const;
  // dz / dz_j at z = from_chart(w)
  cplx dz_dchart(cplx w) const;
  bool in_end(cplx z) const;
};

// One end per boundary component. The core radius sits at the fraction `core_fraction` of the way
// from the homology circles to the boundary, in log scale. InvalidArgument if ends overlap.
std::vector<EndChart> end_charts(const CircularDomain& d, double core_fraction = 0.3);
bool in_core(const std::vector<EndChart>& ends, cplx z);

struct AnnulusBand {
  int end = 0;  // index into the end charts
  int k = 0;    // bracket index
  double r = 0.0;
  double R = 0.0;
};

struct BandSet {
  std::vector<double> brackets;  // t_0 < t_1 < ... < t_l = 1; bracket k is [t_k, t_{k+1}]
  std::vector<AnnulusBand> bands;

  // Bracket containing t, or -1 below t_0.
  int bracket_of(double t) const;
};

// Value of f_t^3 theta / dz at sample k of the t-grid.
using ThirdFamily = std::function<cplx(size_t, cplx)>;

struct BandOptions {
  double t0 = 0.5;
  int n_r = 64;
  int n_theta = 256;
  double margin = 2.0;  // certified minimum must beat the grid variation by this factor
  int max_splits = 4;
};

// Bands on which every f_t^3 in the bracket stays away from zero; NoBandFound otherwise.
BandSet find_bands(const std::vector<double>& t, const ThirdFamily& f3, const std::vector<EndChart>& ends,
                   const BandOptions& opt = {});

struct LabyrinthSet {
  int n = 0;
  double r_in = 0.0;
  double r_out = 0.0;
  double half_gap = 0.0;  // half angular width of the opening, 1 / N^2
  double opening = 0.0;   // 0 for even n, pi for odd n

  bool contains(cplx w) const;
};

struct Labyrinth {
  AnnulusBand band;
  int N = 0;
  std::vector<LabyrinthSet> sets;  // n = 1, ..., 2 N^2

  double s(int n) const;
  bool contains(cplx w) const;  // w in chart coordinates
  // Radial gap between sets n and n + 1, in interval arithmetic.
  std::pair<double, double> clearance(int n) const;
  // Pairwise disjointness and containment in the band, in interval arithmetic.
  bool certify() const;
};

// BandTooThin unless 2 / N < R - r.
Labyrinth build_labyrinth(const AnnulusBand& band, int N);

struct LopezRosParams {
  double lambda = 0.0;
  double epsilon = 0.0;
  double c0 = 0.0;
  double t0 = 0.5;
  int N = 0;
};

// epsilon = f3_min / 2 and the smallest lambda with (1 + lambda t0) c0 >= 2 N^4 (1 + margin).
LopezRosParams choose_params(double f3_min, double c0, double t0, int N, double margin = 0.1);
// (1 + lambda t) |g| > 2 N^4 at the given t.
bool lambda_holds(const LopezRosParams& p, double g_abs, double t);

// g -> mu g with f3 fixed; the third component is returned untouched.
CVec3 lopez_ros_point(const CVec3& f, cplx mu);

// Transformed data h_t: on the labyrinths g_t -> (1 + lambda t) g_t, elsewhere f_t.
struct LopezRosFamily {
  std::vector<double> t;
  std::vector<HoloForm> f;
  std::vector<EndChart> ends;
  std::vector<Labyrinth> labyrinths;
  LopezRosParams params;

  // Labyrinth containing z, or -1.
  int labyrinth_of(cplx z) const;
  CVec3 operator()(size_t k, cplx z) const;
  double density(size_t k, cplx z) const;
};

LopezRosFamily lopez_ros(const std::vector<double>& t, const std::vector<HoloForm>& f,
                         const std::vector<EndChart>& ends, const std::vector<Labyrinth>& labyrinths,
                         const LopezRosParams& params);

struct DistanceOptions {
  int n_r = 128;
  int n_theta = 512;
  std::vector<int> targets;  // boundary components (-1 outer, j hole); empty for all
  int refinements = 0;       // grid doublings while the value moves by more than refine_tol
  double refine_tol = 0.01;
};

struct DistanceResult {
  double distance = 0.0;
  int n_r = 0;
  int n_theta = 0;
  double change = 0.0;       // relative change at the last doubling
  double calibration = 1.0;  // graph distance over exact distance for the flat metric
};

// Dijkstra on an 8-connected polar grid about the outer center; edge weight
// (sqrt(rho_a) + sqrt(rho_b)) / 2 |z_a - z_b| for ds^2 = rho |dz|^2.
DistanceResult intrinsic_distance(const std::function<double(cplx)>& density, const CircularDomain& d, cplx x0,
                                  const DistanceOptions& opt = {});

// F = q^2 (A^2 / mu - B^2 mu, i (A^2 / mu + B^2 mu), 2 A B) with mu = exp(psi).
struct LopezRosMap {
  SpinorMap base;
  HoloFunction psi;  // no blocks: the base map itself

  CVec3 operator()(cplx z) const;
  HoloForm as_form() const;
};

struct CompletionOptions {
  double core_fraction = 0.3;
  BandOptions bands;
  int N = 0;  // 0: smallest N meeting the crossing estimate with n_margin
  double n_margin = 0.25;
  double lambda_margin = 0.1;
  int degree = 48;           // Laurent degree of log mu_t
  double core_weight = 1e3;  // least-squares weight of core samples against labyrinth samples
  DistanceOptions distance;
  int final_refinements = 4;
  int est_paths = 100;
  int est_t_samples = 3;
  std::uint64_t seed = 1;
  bool strict = true;  // EstimateNotMet on a violated (IV) or (V)
};

struct CompletionReport {
  double tau = 0.0;
  double delta = 0.0;
  std::vector<double> distance;  // dist(x0, bM) per t
  DistanceResult final_distance;
  double third_change = 0.0;     // max |F3~ - F3| on the grid
  double flux_change = 0.0;      // max |period change| over generators and t
  bool anchored = false;         // t = 0 equals the input
  double est1_ratio = 0.0;       // min density / (N^8 eps^2) on labyrinth grid points
  double est2_ratio = 0.0;       // min density / eps^2 on band grid points
  double est3_ratio = 0.0;       // min crossing length / bound over random paths
  double core_error = 0.0;       // max |F~ - F| / max |F| on the core
  double fit_error = 0.0;        // max |log mu_1 - log(1 + lambda)| on labyrinth samples
  bool I_ok = false, II_ok = false, III_ok = false, IV_ok = false, V_ok = false;
  bool est_ok = false;

  bool ok() const { return I_ok && II_ok && III_ok && IV_ok && V_ok && est_ok; }
};

struct CompletionResult {
  std::vector<double> t;
  std::vector<LopezRosMap> maps;
  std::vector<EndChart> ends;
  BandSet bands;
  std::vector<Labyrinth> labyrinths;
  LopezRosParams params;
  CompletionReport report;
};

CompletionResult complete_step(const ImmersionFamily& u, double delta, const CompletionOptions& opt = {});

}  // namespace cmi
