// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cmi/cli/run.hpp"
#include "cmi/isotopy.hpp"
#include "cmi/labyrinth.hpp"
#include "cmi/loops.hpp"
#include "cmi/sprays.hpp"

using namespace cmi;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<void(Outcome&)> body;
};

bool same_coefficients(const HoloFunction& a, const HoloFunction& b) {
  if (a.blocks().size() != b.blocks().size()) return false;
  for (size_t i = 0; i < a.blocks().size(); ++i) {
    const LaurentBlock &x = a.blocks()[i], &y = b.blocks()[i];
    if (x.center != y.center || x.scale != y.scale || x.min_exp != y.min_exp || x.coeffs != y.coeffs) return false;
  }
  return true;
}

// Residual suite shared by the flux drivers.
void isotopy_suite(Outcome& o, const ImmersionFamily& f, const SpinorImmersion& u0, const std::vector<Vec3>& target,
                   bool closes) {
  const VerificationReport v = verify(f, 64, 256);
  double flux_err = 0.0;
  for (size_t g = 0; g < target.size(); ++g) flux_err = std::max(flux_err, (v.flux.back()[g] - target[g]).norm());
  const bool anchored = same_coefficients(f.maps.front().A, u0.map.A) && same_coefficients(f.maps.front().B, u0.map.B);
  o.detail << " t-samples " << f.t.size() << ", flux error " << flux_err << ", conformality " << v.max_conformality
           << ", real period " << v.max_real_period;
  o.check(f.t.size() == 64, "64 t-samples");
  o.check(flux_err <= 1e-8, "flux target");
  o.check(v.max_conformality <= 1e-9, "conformality");
  o.check(v.max_real_period <= 1e-9, "real periods");
  o.check(anchored, "u0 coefficients");
  if (closes) {
    o.detail << ", null curve period " << v.null_curve_period;
    o.check(v.null_curve_period <= 1e-8, "null curve periods");
  }
}

PeriodicPath catenoid_loop(int n = 1024) {
  return restrict_to_curve(catalog("catenoid").as_form(), homology_basis(default_annulus())[0], n);
}

RealPath circle(int n, double r, const Eigen::Matrix3d& rot, const Vec3& c) {
  return RealPath::from_function(
      [&](double x) -> Vec3 { return c + r * (rot * Vec3(std::cos(kTwoPi * x), std::sin(kTwoPi * x), 0.0)); }, n);
}

// Loop through the null quadric from a spinor turning by m half-turns, modulated by low-order
// trigonometric factors.
std::function<CVec3(double)> spinor_loop(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  const cplx a1(u(rng), u(rng)), a2(u(rng), u(rng)), b0(u(rng), u(rng)), b1(u(rng), u(rng));
  return [=](double x) {
    const cplx e = std::polar(1.0, kTwoPi * x);
    const cplx a = 1.0 + a1 * e + a2 * std::conj(e);
    const cplx b = b0 + b1 * e;
    const cplx turn = std::polar(1.0, kPi * m * x);
    return spinor_to_null({turn * a, turn * b});
  };
}

const std::vector<std::vector<PeriodicPath>>& spray_family() {
  static const std::vector<std::vector<PeriodicPath>> fam = [] {
    PeriodIsotopyOptions opt;
    opt.n_t = 32;
    opt.enforce_nonflat = false;
    const PairFamily pf = prescribe_period_isotopy(loop_to_pair(catenoid_loop(), 0, Vec3::Zero()), Vec3::Zero(),
                                                   Segment(0.0, 0.05), Segment(0.06, 0.26), opt);
    std::vector<std::vector<PeriodicPath>> out;
    for (const auto& p : pf.pairs) out.push_back({pair_to_loop(p)});
    return out;
  }();
  return fam;
}

void criterion1(Outcome& o) {
  const Vec3 fl = flux(catalog("catenoid").as_form(), homology_basis(default_annulus())[0]);
  // residue of F3 = 1 / z at 0 is 1, so the period is 2 pi i e3
  const double err = (fl - Vec3(0.0, 0.0, kTwoPi)).norm();
  o.detail << " flux error " << err;
  o.check(err <= 1e-10, "flux (0, 0, 2 pi)");
}

void criterion2(Outcome& o) {
  const SpinorImmersion u0 = spinor_catalog("catenoid");
  const ImmersionFamily f = flux_to_zero(u0);
  isotopy_suite(o, f, u0, {Vec3::Zero()}, true);
}

void criterion3(Outcome& o) {
  const SpinorImmersion u0 = spinor_catalog("catenoid");
  const Vec3 target(0.0, 0.0, 2.0 * kTwoPi);
  const ImmersionFamily f = prescribe_flux(u0, {target});
  isotopy_suite(o, f, u0, {target}, false);
}

void criterion4(Outcome& o) {
  std::mt19937_64 rng(20240501);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.3, 3.0);
  std::uniform_int_distribution<int> cls(-2, 3);
  double worst_res = 0.0, worst_mean = 0.0;
  int matched = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Quaterniond q(nd(rng), nd(rng), nd(rng), nd(rng));
    q.normalize();
    const double r = ud(rng);
    const RealPath h0 = circle(256, r, q.toRotationMatrix(), Vec3(nd(rng), nd(rng), nd(rng)));
    const int k = cls(rng);
    const ZeroPeriodResult res = make_zero_period_pair(h0, k, 0.05);
    const PairResiduals pr = pair_residuals(res.pair);
    worst_res = std::max({worst_res, pr.orthogonality, pr.length});
    worst_mean = std::max(worst_mean, res.pair.g.mean().norm());
    const int recomputed = pi1_class(complexify(res.pair.dh, res.pair.g));
    if (recomputed == ((k % 2) + 2) % 2 && recomputed == res.pi1) ++matched;
  }
  o.detail << " conformal residual " << worst_res << ", |int g| " << worst_mean << ", classes matched " << matched
           << "/20";
  o.check(worst_res <= 1e-10, "pair residuals");
  o.check(worst_mean <= 1e-10, "|int g|");
  o.check(matched == 20, "spin classes");
}

void criterion5(Outcome& o) {
  const auto& fam = spray_family();
  const LoopSpray s = build_spray(fam, {Segment(0.07, 0.98)});
  double smin = 1e300;
  for (int t = 0; t < s.n_t(); ++t) smin = std::min(smin, smallest_singular_value(period_jacobian(s, t)));
  const LoopSpray f3 = build_spray_fixed_third(fam, {Segment(0.07, 0.98)});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double smin3 = 1e300;
  bool third_kept = true;
  for (int t = 0; t < f3.n_t(); ++t) {
    Eigen::VectorXcd w(3);
    for (int i = 0; i < 3; ++i) w(i) = cplx(u(rng), u(rng));
    w *= 0.5 / w.norm();
    const auto moved = f3.apply(t, w);
    for (int k = 0; k < moved[0].size(); ++k)
      third_kept = third_kept && moved[0][k](2) == fam[static_cast<size_t>(t)][0][k](2);
    const Eigen::MatrixXcd j = period_jacobian(f3, t);
    smin3 = std::min(smin3, j.rows() == 2 ? smallest_singular_value(j) : 0.0);
  }
  o.detail << " t-samples " << s.n_t() << ", min singular value " << smin << ", fixed-third min singular value "
           << smin3 << ", third components " << (third_kept ? "bitwise equal" : "changed");
  o.check(smin > 1e-4, "domination");
  o.check(third_kept, "third components");
  o.check(smin3 > 1e-4, "rank on components 1-2");
}

void criterion6(Outcome& o) {
  ImmersionFamily fam;
  for (int k = 0; k < 16; ++k) fam.t.push_back(k / 15.0);
  fam.maps.assign(fam.t.size(), spinor_catalog("catenoid").map);
  CompletionOptions opt;
  opt.strict = false;
  const CompletionResult r = complete_step(fam, 0.5, opt);
  const CompletionReport& q = r.report;
  double min_dist = 1e300;
  for (double d : q.distance) min_dist = std::min(min_dist, d);
  o.detail << " N " << r.params.N << ", third change " << q.third_change << ", flux change " << q.flux_change
           << ", tau " << q.tau << ", min distance " << min_dist << ", distance at t = 1 " << q.final_distance.distance
           << " (" << q.final_distance.n_r << "x" << q.final_distance.n_theta << ")"
           << ", est ratios " << q.est1_ratio << "/" << q.est2_ratio << "/" << q.est3_ratio;
  o.check(q.I_ok, "(I) core approximation");
  o.check(q.third_change <= 1e-10 && q.II_ok, "(II) third components");
  o.check(q.flux_change <= 1e-10 && q.III_ok, "(III) flux");
  o.check(q.IV_ok, "(IV) distance > tau - delta");
  o.check(q.V_ok && q.final_distance.distance > 2.0, "(V) distance > 1/delta = 2");
  o.check(q.est_ok, "est1/est2/est3");
}

void criterion7(Outcome& o) {
  for (int N : {2, 3, 5}) {
    const Labyrinth l = build_labyrinth({0, 0, 1.0, 2.5}, N);
    bool clear = true;
    const double exact = 1.0 / (2.0 * N * N * N);
    for (int n = 1; n < 2 * N * N; ++n) {
      const auto [lo, hi] = l.clearance(n);
      clear = clear && lo <= exact && exact <= hi && hi - lo <= 1e-14;
    }
    o.detail << " N=" << N << ": " << l.sets.size() << " sets";
    o.check(static_cast<int>(l.sets.size()) == 2 * N * N, "2N^2 sets");
    o.check(l.certify(), "disjointness");
    o.check(clear, "clearance 1/(2N^3)");
  }
}

void criterion8(Outcome& o) {
  std::vector<std::function<CVec3(double)>> corpus;
  for (const char* name : {"catenoid", "enneper_annulus"}) {
    const HoloForm f = catalog(name).as_form();
    const CurveChart c = homology_basis(default_annulus())[0];
    corpus.push_back([f, c](double x) { return CVec3(f(c.z(x)) * c.dz(x)); });
  }
  std::mt19937_64 rng(8);
  for (int m = 0; m < 8; ++m) corpus.push_back(spinor_loop(rng, m % 4));
  std::normal_distribution<double> nd;
  int stable = 0, doubled = 0;
  for (const auto& f : corpus) {
    const int c64 = pi1_class(PeriodicPath::from_function(f, 64));
    const int c1024 = pi1_class(PeriodicPath::from_function(f, 1024));
    const cplx p1(nd(rng), nd(rng)), p2(nd(rng), nd(rng));
    // complex rotations and scaling of size 1e-3 keep the loop on the quadric
    const auto pert = [&](double x) {
      NullPoint v = flow(f(x), TangentFlow::rotation_12, 1e-3 * p1 * std::cos(kTwoPi * x));
      v = flow(v, TangentFlow::rotation_23, 1e-3 * p2 * std::sin(kTwoPi * x));
      return flow(v, TangentFlow::scaling, 1e-3 * p1 * std::cos(2.0 * kTwoPi * x));
    };
    const int cp = pi1_class(PeriodicPath::from_function(pert, 1024));
    if (c64 == c1024 && cp == c1024) ++stable;
    if (pi1_class(PeriodicPath::from_function([&](double x) { return f(std::fmod(2.0 * x, 1.0)); }, 1024)) == 0)
      ++doubled;
  }
  const SpinorImmersion u = spinor_catalog("catenoid");
  std::set<int> labels;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    labels.insert(cli::classify_generators(u.map.as_form(), u.map.domain, seed).classes.at(0));
  o.detail << " stable " << stable << "/10, doubled loops even " << doubled << "/10, classify labels over 5 seeds "
           << labels.size();
  o.check(stable == 10, "resampling and perturbation");
  o.check(doubled == 10, "class of doubled loop");
  o.check(labels.size() == 1, "classify consistency");
}

void criterion9(Outcome& o) {
  // residues: F dz = z^k dz has period 2 pi i for k = -1 and 0 otherwise
  const CurveChart c = homology_basis(default_annulus())[0];
  double res_err = 0.0;
  for (int k = -3; k <= 3; ++k) {
    const CVec3 p = loop_period([k](cplx z) { return CVec3(std::pow(z, k), 0.0, 0.0); }, c);
    res_err = std::max(res_err, std::abs(p(0) - (k == -1 ? kTwoPi * kI : cplx(0.0))));
  }
  const Vec3 cat = flux(catalog("catenoid").as_form(), c);
  res_err = std::max(res_err, (cat - Vec3(0.0, 0.0, kTwoPi)).norm());

  // SVD rank of the spray Jacobian against its smallest singular value
  const LoopSpray s = build_spray(spray_family(), {Segment(0.07, 0.98)});
  const Eigen::MatrixXcd j = period_jacobian(s, 5);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(j);
  svd.setThreshold(1e-6);
  const bool rank_ok = svd.rank() == 3 && std::abs(svd.singularValues()(2) - smallest_singular_value(j)) <= 1e-12;

  // refinement: loop restriction and intrinsic distance
  const double per_ref =
      (period(catenoid_loop(1024)) - period(catenoid_loop(2048))).norm();
  const HoloForm cf = catalog("catenoid").as_form();
  DistanceOptions dopt;
  dopt.refinements = 2;
  const DistanceResult d = intrinsic_distance([&](cplx z) { return metric_density(cf, z); }, default_annulus(), 1.0, dopt);
  const double dist_err = std::abs(d.distance - 0.75);

  // two-path integration on the zero-flux member of the flux isotopy
  const ImmersionFamily f = flux_to_zero(spinor_catalog("catenoid"));
  const HoloForm last = f.maps.back().as_form();
  const auto basis = homology_basis(default_annulus());
  const Vec3 upper = integrate_immersion(last, basis, 1.0, Vec3::Zero(), -1.0, {PathPiece::arc(0.0, 1.0, 0.0, kPi)});
  const Vec3 lower = integrate_immersion(last, basis, 1.0, Vec3::Zero(), -1.0, {PathPiece::arc(0.0, 1.0, 0.0, -kPi)});
  const double two_path = (upper - lower).norm();

  o.detail << " residue error " << res_err << ", SVD rank " << svd.rank() << ", period refinement " << per_ref
           << ", neck distance " << d.distance << " (change " << d.change << "), two-path gap " << two_path;
  o.check(res_err <= 1e-10, "residues");
  o.check(rank_ok, "SVD rank");
  o.check(per_ref <= 1e-10, "period refinement");
  o.check(dist_err <= 0.0075 && d.change <= 0.01, "distance refinement");
  o.check(two_path <= 1e-9, "two-path integration");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "catenoid flux", 1.0, criterion1},
      {2, "flux_to_zero on the catenoid", 60.0, criterion2},
      {3, "prescribe_flux (0, 0, 4 pi) on the catenoid", 60.0, criterion3},
      {4, "zero-period pairs on 20 random circles", 30.0, criterion4},
      {5, "period domination of the catenoid spray", 0.0, criterion5},
      {6, "completeness step on the catenoid family, delta = 0.5", 300.0, criterion6},
      {7, "labyrinth combinatorics", 0.0, criterion7},
      {8, "pi1 classification", 0.0, criterion8},
      {9, "oracle equivalences", 0.0, criterion9},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail << " [failed: runtime above " << c.budget_s << " s]";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d %s: %s;%s (%.2f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
