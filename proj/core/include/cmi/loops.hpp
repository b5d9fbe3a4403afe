#pragma once

#include <optional>
#include <vector>

#include "cmi/common.hpp"
#include "cmi/nullquadric.hpp"
#include "cmi/periodic_path.hpp"

namespace cmi {

// Arc [a, b] of R/Z with 0 <= a < 1 and a < b < a + 1.
struct Segment {
  double a = 0.0;
  double b = 0.0;

  Segment() = default;
  Segment(double a_, double b_);
  double length() const { return b - a; }
  bool contains(double x) const;
  // Coordinate of x unwrapped to [a, a + 1).
  double unwrap(double x) const;
  bool overlaps(const Segment& o) const;
};

// C-infinity step: 0 for u <= 0, 1 for u >= 1.
double smooth_step(double u);
double smooth_step_derivative(double u);
// 1 on [a + r, b - r], 0 outside [a, b], smooth_step ramps of width r.
double plateau(const Segment& s, double r, double x);

CVec3 period(const PeriodicPath& sigma);

// Immersed circle h, its derivative and the conjugate direction g.
struct ConformalPair {
  RealPath h;
  RealPath dh;
  RealPath g;

  int size() const { return h.size(); }
};

struct PairResiduals {
  double orthogonality = 0.0;  // max |g.h'| / (|g||h'|)
  double length = 0.0;         // max ||g| - |h'|| / |h'|
  double min_speed = 0.0;      // min |h'|
};

PairResiduals pair_residuals(const ConformalPair& p);

ConformalPair make_pair(const RealPath& h, const RealPath& g);

// h is recovered from dh by the spectral antiderivative and pinned to h(x_k) = value at k = anchor.
ConformalPair pair_from_derivative(const RealPath& dh, const RealPath& g, int anchor, const Vec3& value);

PeriodicPath pair_to_loop(const ConformalPair& p, double tol_conf = 1e-10);

ConformalPair loop_to_pair(const PeriodicPath& sigma, int anchor, const Vec3& value);

// sigma_3 / sigma_1 of the centered samples of h on the segment; 0 if fewer than 4 samples.
double nonflat_ratio(const RealPath& h, const Segment& on);
bool is_nonflat(const RealPath& h, const Segment& on, double rel_threshold = 1e-8);

double min_speed(const RealPath& h);

struct ZeroPeriodOptions {
  double epsilon0 = 0.1;
  int max_halvings = 4;
  int max_spin = 64;
  // Samples per unit of delta; the working resolution is the next power of two above 200 / delta.
  double samples_per_inverse_delta = 200.0;
};

struct ZeroPeriodResult {
  ConformalPair pair;
  double epsilon = 0.0;
  Vec3 p = Vec3::Zero();
  int spin_turns_b = 0;
  int spin_turns_out = 0;
  double leak = 0.0;  // max over sampled |p| = 1 of the integral off A and C
  double sup_distance = 0.0;  // max |h - h0|
  int pi1 = 0;
};

ZeroPeriodResult make_zero_period_pair(const RealPath& h0, int spin_class, double delta,
                                       const ZeroPeriodOptions& opt = {});

struct PeriodIsotopyOptions {
  int n_t = 64;
  std::optional<Segment> J;
  std::optional<Segment> L;
  double window_std = 0.04;
  double tol_period = 1e-9;
  double tol_conf = 1e-10;
  // Angle of the bending applied on nonflat_on when h0 is flat there.
  double nonflat_amplitude = 1e-3;
  int max_nonflat_retries = 4;
  // When false, nonflatness on nonflat_on is only reported, never bent in.
  bool enforce_nonflat = true;
  int max_halvings = 12;
};

struct PairFamily {
  std::vector<double> t;
  std::vector<ConformalPair> pairs;
  std::vector<Vec3> correction_p;  // parameter of the final device per t
  Segment J;
  Segment L;
  Segment compensation;  // second bump of the final device, inside L
  std::vector<double> control_norm;  // |w| of the flow controls per t
  double max_conf_residual = 0.0;
  double final_period_error = 0.0;
  bool nonflat_ok = true;
  double min_nonflat_ratio = 0.0;
};

PairFamily prescribe_period_isotopy(const ConformalPair& p0, const Vec3& v, const Segment& fixed,
                                    const Segment& nonflat_on, const PeriodIsotopyOptions& opt = {});

struct ImmersionFamily1D {
  std::vector<double> t;
  std::vector<RealPath> h;
  double min_speed = 0.0;
  int retries = 0;
};

ImmersionFamily1D connect_immersions(const RealPath& h0, const RealPath& h1,
                                     std::optional<Segment> fixed = std::nullopt, int n_t = 64,
                                     unsigned seed = 1, int max_retries = 8);

bool nondegenerate_on(const PeriodicPath& sigma, const Segment& I, double rel_threshold = 1e-8);

}  // namespace cmi
