#include "cmi/isotopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmi {

MinimalImmersion SpinorImmersion::immersion(double tol_period) const {
  return make_immersion(map.as_form(), map.domain, basepoint, value, tol_period);
}

SpinorImmersion spinor_catalog(const std::string& name) {
  const WeierstrassData d = catalog(name);
  SpinorImmersion u;
  u.map = spinor_form(d.as_form(), default_annulus()).map;
  return u;
}

CVec3 NullCurve::operator()(cplx z) const {
  const HoloForm f = map.as_form();
  const HoloForm g = [f](cplx w) -> CVec3 { return -kI * f(w); };
  const auto path = default_path(map.domain, basepoint, z);
  const Vec3 re = integrate_immersion(f, {}, basepoint, value.real(), z, path);
  const Vec3 im = integrate_immersion(g, {}, basepoint, value.imag(), z, path);
  return re.cast<cplx>() + kI * im.cast<cplx>();
}

NullCurve ImmersionFamily::null_curve() const {
  if (maps.empty()) throw Error(ErrorCode::InvalidArgument, "empty family");
  return {maps.back(), basepoint, value.cast<cplx>()};
}

namespace {

std::vector<double> t_grid(int n) {
  std::vector<double> t(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) t[static_cast<size_t>(k)] = static_cast<double>(k) / (n - 1);
  return t;
}

ImmersionFamily constant_family(const SpinorImmersion& u0, const std::vector<Vec3>& target, int n_t,
                                const std::string& notice) {
  ImmersionFamily f;
  f.t = t_grid(n_t);
  f.maps.assign(f.t.size(), u0.map);
  f.basepoint = u0.basepoint;
  f.value = u0.value;
  f.target = target;
  f.constant = true;
  f.notice = notice;
  f.degree = u0.map.degree();
  f.control_norm.assign(f.t.size(), 0.0);
  return f;
}

std::vector<CVec3> curve_periods(const SpinorMap& m, const std::vector<CurveChart>& charts) {
  std::vector<CVec3> out;
  for (const auto& c : charts) out.push_back(loop_period(m.as_form(), c));
  return out;
}

}  // namespace

ImmersionFamily prescribe_flux(const SpinorImmersion& u0, const std::vector<Vec3>& p, const IsotopyOptions& opt) {
  const CircularDomain& d = u0.map.domain;
  const std::vector<CurveChart> charts = homology_basis(d);
  const size_t l = charts.size();
  if (p.size() != l) throw Error(ErrorCode::InvalidArgument, "need one flux target per generator");
  if (opt.n_t < 2) throw Error(ErrorCode::InvalidArgument, "need at least two t-samples");

  const HoloForm f0 = u0.map.as_form();
  std::vector<PeriodicPath> loops0;
  std::vector<Vec3> flux0;
  bool met = true;
  for (size_t j = 0; j < l; ++j) {
    loops0.push_back(restrict_to_curve(f0, charts[j], opt.n_s));
    const CVec3 per = period(loops0.back());
    if (per.real().norm() > opt.tol.period)
      throw Error(ErrorCode::RealPeriodNonzero, "input has a nonzero real period on generator " + std::to_string(j));
    flux0.push_back(per.imag());
    met = met && (flux0.back() - p[j]).norm() <= opt.tol.flux;
  }

  std::vector<CVec3> samples;
  for (cplx z : verification_grid(d, 16, 64)) samples.push_back(f0(z));
  if (is_flat(samples).flat) {
    if (!met) throw Error(ErrorCode::FlatInput, "flat input cannot reach a nonzero flux target");
    return constant_family(u0, p, opt.n_t, "flat input: already the real part of a null curve, constant family");
  }
  if (met) return constant_family(u0, p, opt.n_t, "flux target met at t = 0, constant family");

  // loop stage: period isotopies on every generator
  PeriodIsotopyOptions lopt = opt.loops;
  lopt.n_t = opt.n_t;
  // nonflatness is monitored on the surfaces; bending the loop would add narrow features
  lopt.enforce_nonflat = false;
  std::vector<std::vector<PeriodicPath>> sigma(static_cast<size_t>(opt.n_t), std::vector<PeriodicPath>(l));
  for (size_t j = 0; j < l; ++j) {
    const ConformalPair pair = loop_to_pair(loops0[j], 0, Vec3::Zero());
    const PairFamily pf = prescribe_period_isotopy(pair, p[j], opt.fixed, opt.nonflat_on, lopt);
    for (int t = 0; t < opt.n_t; ++t)
      sigma[static_cast<size_t>(t)][j] = pair_to_loop(pf.pairs[static_cast<size_t>(t)], opt.tol.conf);
  }

  // Runge stage at w = 0, fixing one truncation degree for the whole family
  ImmersionFamily fam;
  fam.t = t_grid(opt.n_t);
  fam.basepoint = u0.basepoint;
  fam.value = u0.value;
  fam.target = p;
  RungeOptions ropt = opt.runge;
  ropt.check_grid = false;
  std::vector<SpinorMap> ref(static_cast<size_t>(opt.n_t));
  ref[0] = u0.map;
  int degree = ropt.min_degree;
  for (int t = 1; t < opt.n_t; ++t) {
    const RungeResult r =
        runge_extend(sigma[static_cast<size_t>(t)], d, charts, &ref[static_cast<size_t>(t - 1)], ropt, &u0.map);
    ref[static_cast<size_t>(t)] = r.map;
    degree = std::max(degree, r.degree);
  }
  ropt.min_degree = ropt.max_degree = degree;
  fam.degree = degree;

  // spray on the complement of the fixed arc, periods corrected on the extended maps
  const Segment spray_seg(opt.fixed.b + 0.02, opt.fixed.a + 0.98);
  const LoopSpray spray = build_spray(sigma, std::vector<Segment>(l, spray_seg), opt.spray);
  PeriodTargets targets(static_cast<size_t>(opt.n_t));
  for (int t = 0; t < opt.n_t; ++t) {
    const double s = fam.t[static_cast<size_t>(t)];
    for (size_t j = 0; j < l; ++j)
      targets[static_cast<size_t>(t)].push_back(kI * ((1.0 - s) * flux0[j] + s * p[j]).cast<cplx>());
  }
  const PeriodMap realize = [&](int t, const std::vector<PeriodicPath>& loops) {
    if (t == 0) return curve_periods(u0.map, charts);
    const RungeResult r = runge_extend(loops, d, charts, &ref[static_cast<size_t>(t)], ropt, &u0.map);
    return curve_periods(r.map, charts);
  };
  SolveOptions sopt = opt.solve;
  // margin so the recomputed periods stay inside the tolerance
  sopt.tol_period = 1e-2 * opt.tol.period;
  const SolveResult sol = solve_w(spray, targets, sopt, realize);

  RungeOptions fopt = ropt;
  fopt.check_grid = true;
  fam.maps.push_back(u0.map);
  fam.control_norm.push_back(0.0);
  for (int t = 1; t < opt.n_t; ++t) {
    const RungeResult r = runge_extend(spray.apply(t, sol.w[static_cast<size_t>(t)]), d, charts,
                                       &ref[static_cast<size_t>(t)], fopt, &u0.map);
    for (double e : r.sup_error) fam.max_runge_error = std::max(fam.max_runge_error, e);
    fam.maps.push_back(r.map);
    fam.control_norm.push_back(sol.w[static_cast<size_t>(t)].norm());
  }
  return fam;
}

ImmersionFamily flux_to_zero(const SpinorImmersion& u0, const IsotopyOptions& opt) {
  return prescribe_flux(u0, std::vector<Vec3>(u0.map.domain.holes.size(), Vec3::Zero()), opt);
}

VerificationReport verify(const ImmersionFamily& f, int n_r, int n_theta, const Tolerances& tol) {
  VerificationReport rep;
  rep.n_r = n_r;
  rep.n_theta = n_theta;
  rep.tol_conf = tol.null;
  rep.tol_period = tol.period;
  if (f.maps.empty()) return rep;
  const CircularDomain& d = f.maps.front().domain;
  const std::vector<cplx> grid = verification_grid(d, n_r, n_theta);
  const std::vector<CurveChart> charts = homology_basis(d);
  rep.min_metric = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < f.maps.size(); ++k) {
    const HoloForm form = f.maps[k].as_form();
    std::vector<CVec3> vals;
    vals.reserve(grid.size());
    for (cplx z : grid) vals.push_back(form(z));
    rep.max_conformality = std::max(rep.max_conformality, conformality_residual(vals));
    for (const auto& v : vals) rep.min_metric = std::min(rep.min_metric, 0.5 * v.squaredNorm());
    rep.flat.push_back(is_flat(vals).flat);
    std::vector<Vec3> fl;
    std::vector<int> cls;
    for (const auto& c : charts) {
      const CVec3 per = loop_period(form, c);
      rep.max_real_period = std::max(rep.max_real_period, per.real().norm());
      fl.push_back(per.imag());
      cls.push_back(pi1_class(restrict_to_curve(form, c, 1024)));
      if (k + 1 == f.maps.size()) rep.null_curve_period = std::max(rep.null_curve_period, per.norm());
    }
    rep.flux.push_back(fl);
    rep.pi1.push_back(cls);
  }
  rep.conformality_ok = rep.max_conformality <= tol.null;
  rep.periods_ok = rep.max_real_period <= tol.period;
  rep.metric_ok = rep.min_metric > 0.0;
  rep.nonflat_ok = std::none_of(rep.flat.begin(), rep.flat.end(), [](bool b) { return b; });
  return rep;
}

}  // namespace cmi
