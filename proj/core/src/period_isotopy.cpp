#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "cmi/loops.hpp"

namespace cmi {

namespace {

constexpr int kModes = 3;  // Hermite functions of degree 0, 1, 2 on the window
constexpr int kControls = 2 * kModes;
// Windows are truncated where the Gaussian drops below 1e-12.
const double kGaussCut = std::sqrt(2.0 * std::log(1e12));

using CVecX = Eigen::VectorXcd;

Segment make_segment(double a, double len) {
  const double a0 = a - std::floor(a);
  return Segment(a0, a0 + len);
}

struct Layout {
  Segment J, L;
};

Layout choose_layout(const Segment& fixed, const Segment& nonflat_on) {
  // the two free arcs between the protected segments
  struct Arc {
    double a, len;
  };
  auto arc = [](double from, double to) {
    double len = to - from;
    len -= std::floor(len);
    return Arc{from, len};
  };
  const Arc arcs[2] = {arc(fixed.b, nonflat_on.a), arc(nonflat_on.b, fixed.a)};
  const Arc best = arcs[0].len >= arcs[1].len ? arcs[0] : arcs[1];
  if (best.len < 0.1) throw Error(ErrorCode::SegmentOverlap, "no free arc of length 0.1 for J and L");
  const double m = std::min(0.02, best.len / 30.0);
  const double delta = std::min(0.03, best.len / 18.0);
  Layout out;
  out.J = make_segment(best.a + m, 3.0 * delta);
  const double l0 = best.a + m + 3.0 * delta + 1.5 * m;
  out.L = make_segment(l0, best.a + best.len - m - l0);
  return out;
}

std::vector<int> indices_in(const Segment& s, int n) {
  std::vector<int> idx;
  for (int k = 0; k < n; ++k)
    if (s.contains(static_cast<double>(k) / n)) idx.push_back(k);
  return idx;
}

// Truncated Gaussian filling a segment.
struct Window {
  std::vector<int> idx;
  std::vector<double> x;  // offset from the center
  std::vector<double> psi;
  double sd = 1.0;

  Window(const Segment& s, double std_max, int n) {
    const double c = 0.5 * (s.a + s.b);
    const double half = 0.5 * s.length();
    sd = std::min(std_max, half / kGaussCut);
    for (int k : indices_in(s, n)) {
      const double d = s.unwrap(static_cast<double>(k) / n) - c;
      if (std::abs(d) > sd * kGaussCut) continue;
      idx.push_back(k);
      x.push_back(d);
      psi.push_back(std::exp(-0.5 * (d / sd) * (d / sd)));
    }
  }
};

// Additive controls on a spinor lift of the loop over the window:
// (a, b) + psi * sum_m H_m (w_m, w_{3 + m}).
class SpinorControl {
 public:
  SpinorControl(const Window& win, const std::vector<CVec3>& base) : win_(win) {
    for (size_t s = 0; s < win_.idx.size(); ++s) {
      SpinorPair sp = null_to_spinor(base[static_cast<size_t>(win_.idx[s])]);
      // keep the lift continuous along the window
      if (!spin_.empty() && (std::conj(spin_.back().a) * sp.a + std::conj(spin_.back().b) * sp.b).real() < 0.0)
        sp = {-sp.a, -sp.b};
      spin_.push_back(sp);
      const double u = win_.x[s] / win_.sd;
      basis_.push_back({win_.psi[s], win_.psi[s] * u, win_.psi[s] * (u * u - 1.0) / std::sqrt(2.0)});
    }
  }

  SpinorPair spinor(const CVecX& w, size_t s) const {
    SpinorPair sp = spin_[s];
    for (int m = 0; m < kModes; ++m) {
      sp.a += w(m) * basis_[s][static_cast<size_t>(m)];
      sp.b += w(kModes + m) * basis_[s][static_cast<size_t>(m)];
    }
    return sp;
  }

  void apply(const CVecX& w, std::vector<CVec3>& out) const {
    for (size_t s = 0; s < win_.idx.size(); ++s) out[static_cast<size_t>(win_.idx[s])] = spinor_to_null(spinor(w, s));
  }

  // Sum over the window of sigma_w and its derivative with respect to w.
  void sum_and_jacobian(const CVecX& w, CVec3& sum, Eigen::Matrix<cplx, 3, kControls>& jac) const {
    sum.setZero();
    jac.setZero();
    for (size_t s = 0; s < win_.idx.size(); ++s) {
      const SpinorPair sp = spinor(w, s);
      sum += spinor_to_null(sp);
      const CVec3 da(2.0 * sp.a, 2.0 * kI * sp.a, 2.0 * sp.b);
      const CVec3 db(-2.0 * sp.b, 2.0 * kI * sp.b, 2.0 * sp.a);
      for (int m = 0; m < kModes; ++m) {
        jac.col(m) += da * basis_[s][static_cast<size_t>(m)];
        jac.col(kModes + m) += db * basis_[s][static_cast<size_t>(m)];
      }
    }
  }

  double min_norm(const CVecX& w) const {
    double m = std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < win_.idx.size(); ++s) {
      const SpinorPair sp = spinor(w, s);
      m = std::min(m, std::norm(sp.a) + std::norm(sp.b));
    }
    return m;
  }

 private:
  const Window& win_;
  std::vector<SpinorPair> spin_;
  std::vector<std::array<double, kModes>> basis_;
};

// Perturbation device of the final correction: tilt h' on A in the moving frame
// (h'/|h'|, g/|g|, cross), compensate on B so the real period is unchanged.
class Device {
 public:
  static constexpr double kEps = 0.1;

  Device(const Segment& A, const Segment& B, const std::vector<CVec3>& sigma) {
    const int n = static_cast<int>(sigma.size());
    const double r = A.length() / 10.0;
    Eigen::Matrix3d sa = Eigen::Matrix3d::Zero(), sb = Eigen::Matrix3d::Zero();
    auto collect = [&](const Segment& s, std::vector<Item>& items, Eigen::Matrix3d& acc) {
      for (int k : indices_in(s, n)) {
        const double beta = plateau(s, r, static_cast<double>(k) / n);
        if (beta == 0.0) continue;
        Item it;
        it.k = k;
        it.beta = beta;
        it.dh = sigma[static_cast<size_t>(k)].real();
        it.g = sigma[static_cast<size_t>(k)].imag();
        it.speed = it.dh.norm();
        const Vec3 u = it.dh / it.speed, v = it.g / it.g.norm();
        it.frame.col(0) = u;
        it.frame.col(1) = v;
        it.frame.col(2) = u.cross(v);
        acc += beta * it.speed * it.frame;
        items.push_back(it);
      }
    };
    collect(A, a_, sa);
    collect(B, b_, sb);
    m_ = sb.fullPivLu().solve(sa);
  }

  // Change of the sample sum of g and the modified samples.
  Vec3 delta_sum(const Vec3& p, std::vector<CVec3>* out = nullptr) const {
    Vec3 acc = Vec3::Zero();
    for (const auto& it : a_) {
      const double eb = kEps * it.beta;
      const Vec3 dh = it.dh + eb * it.speed * (it.frame * p);
      const Vec3 ap(-p(1), p(0), p(2));
      Vec3 gl = Vec3::UnitY() + eb * ap;
      gl(0) -= eb * eb * p(2) * p(2) / (1.0 + eb * p(0));
      Vec3 g = it.frame * gl;
      g *= dh.norm() / g.norm();
      acc += g - it.g;
      if (out) (*out)[static_cast<size_t>(it.k)] = dh.cast<cplx>() + kI * g.cast<cplx>();
    }
    const Vec3 mp = m_ * p;
    for (const auto& it : b_) {
      const Vec3 dh = it.dh - kEps * it.beta * it.speed * (it.frame * mp);
      const Vec3 t = dh.normalized();
      Vec3 g = it.g - it.g.dot(t) * t;
      g *= dh.norm() / g.norm();
      acc += g - it.g;
      if (out) (*out)[static_cast<size_t>(it.k)] = dh.cast<cplx>() + kI * g.cast<cplx>();
    }
    return acc;
  }

  Eigen::Matrix3d jacobian(const Vec3& p, double step) const {
    Eigen::Matrix3d j;
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e(i) = step;
      j.col(i) = (delta_sum(p + e) - delta_sum(p - e)) / (2.0 * step);
    }
    return j;
  }

 private:
  struct Item {
    int k = 0;
    double beta = 0.0, speed = 0.0;
    Vec3 dh, g;
    Eigen::Matrix3d frame;
  };
  std::vector<Item> a_, b_;
  Eigen::Matrix3d m_;
};

double rel_sv_min(const Eigen::Matrix3d& j) {
  const Vec3 sv = Eigen::JacobiSVD<Eigen::Matrix3d>(j).singularValues();
  return sv(0) > 0.0 ? sv(2) / sv(0) : 0.0;
}

Vec3 real_part(const CVec3& v) { return v.real(); }

}  // namespace

PairFamily prescribe_period_isotopy(const ConformalPair& p0, const Vec3& v, const Segment& fixed,
                                    const Segment& nonflat_on, const PeriodIsotopyOptions& opt) {
  if (fixed.overlaps(nonflat_on)) throw Error(ErrorCode::SegmentOverlap, "fixed and nonflat_on overlap");
  if (opt.n_t < 2) throw Error(ErrorCode::InvalidArgument, "need at least two t-samples");
  const PairResiduals r0 = pair_residuals(p0);
  if (!(r0.orthogonality <= opt.tol_conf && r0.length <= opt.tol_conf && r0.min_speed > 0.0))
    throw Error(ErrorCode::InvalidPair, "initial pair violates the conformality conditions");

  Layout lay;
  if (opt.J && opt.L) {
    lay = {*opt.J, *opt.L};
  } else {
    lay = choose_layout(fixed, nonflat_on);
    if (opt.J) lay.J = *opt.J;
    if (opt.L) lay.L = *opt.L;
  }
  for (const Segment* s : {&lay.J, &lay.L})
    if (s->overlaps(fixed) || s->overlaps(nonflat_on))
      throw Error(ErrorCode::SegmentOverlap, "J or L meets a protected segment");
  if (lay.J.overlaps(lay.L)) throw Error(ErrorCode::SegmentOverlap, "J and L overlap");

  const int n = p0.size();
  const PeriodicPath sigma0 = complexify(p0.dh, p0.g);
  const std::vector<CVec3>& base = sigma0.samples();
  double scale = 0.0;
  for (const auto& z : base) scale += z.norm();
  scale /= n;

  const std::vector<int> fixed_idx = indices_in(fixed, n);
  if (fixed_idx.empty()) throw Error(ErrorCode::EmptySegment, "fixed segment contains no samples");
  const int anchor = fixed_idx.front();

  const Window lwin(lay.L, opt.window_std, n);
  const Window nwin(nonflat_on, opt.window_std, n);
  const SpinorControl control(lwin, base);
  const bool flat0 = !is_nonflat(p0.h, nonflat_on);
  const Vec3 v0 = p0.g.mean();

  const double delta = lay.J.length() / 3.0;
  const Segment A = make_segment(lay.J.a, delta);

  const int retries = opt.enforce_nonflat ? opt.max_nonflat_retries : 0;
  for (int retry = 0; retry <= retries; ++retry) {
    const double bend =
        opt.enforce_nonflat && (flat0 || retry > 0) ? opt.nonflat_amplitude * std::pow(10.0, retry) : 0.0;

    // sigma_t without the L controls: the bending on nonflat_on ramps in with t
    auto bent = [&](double t) {
      std::vector<CVec3> s = base;
      if (bend == 0.0) return s;
      for (size_t q = 0; q < nwin.idx.size(); ++q) {
        const double a = bend * t * nwin.psi[q];
        const size_t k = static_cast<size_t>(nwin.idx[q]);
        s[k] = flow_matrix(TangentFlow::rotation_13, a) * (flow_matrix(TangentFlow::rotation_23, a) * s[k]);
      }
      return s;
    };
    auto target = [&](double t) -> CVec3 { return kI * ((1.0 - t) * v0 + t * v).cast<cplx>(); };

    // Sum of the samples outside the window of L.
    std::vector<char> in_l(static_cast<size_t>(n), 0);
    for (int k : lwin.idx) in_l[static_cast<size_t>(k)] = 1;
    auto outside_sum = [&](const std::vector<CVec3>& s) {
      CVec3 acc = CVec3::Zero();
      for (int k = 0; k < n; ++k)
        if (!in_l[static_cast<size_t>(k)]) acc += s[static_cast<size_t>(k)];
      return acc;
    };

    using Jac = Eigen::Matrix<cplx, 3, kControls>;
    auto pinv = [](const Jac& jac) -> Eigen::Matrix<cplx, kControls, 3> {
      const Eigen::Matrix3cd jj = jac * jac.adjoint();
      const double mu = 1e-12 * jj.norm();
      return jac.adjoint() * (jj + mu * Eigen::Matrix3cd::Identity()).inverse();
    };
    // Damped Gauss-Newton with min-norm steps; returns the final residual.
    auto polish = [&](const CVec3& goal, CVecX& w, double tol) {
      CVec3 sum;
      Jac jac;
      control.sum_and_jacobian(w, sum, jac);
      double res = (sum - goal).norm();
      for (int it = 0; it < 40 && res > tol; ++it) {
        const CVecX step = -pinv(jac) * (sum - goal);
        bool moved = false;
        double alpha = 1.0;
        for (int ls = 0; ls < 20; ++ls, alpha *= 0.5) {
          const CVecX trial = w + alpha * step;
          CVec3 s2;
          Jac j2;
          control.sum_and_jacobian(trial, s2, j2);
          const double r2 = (s2 - goal).norm();
          if (r2 < res) {
            w = trial;
            sum = s2;
            jac = j2;
            res = r2;
            moved = true;
            break;
          }
        }
        if (!moved) break;
      }
      return res;
    };
    auto newton = [&](double t, CVecX& w) {
      const CVec3 goal = target(t) * static_cast<double>(n) - outside_sum(bent(t));
      const double tol = 1e-14 * scale * n;
      const double accept = std::max(tol, 1e-3 * opt.tol_period * n);
      double res = polish(goal, w, tol);
      if (!(res <= accept)) return false;
      // slide along the solution set towards the locally smallest controls
      for (int it = 0; it < 30; ++it) {
        CVec3 sum;
        Jac jac;
        control.sum_and_jacobian(w, sum, jac);
        const Eigen::Matrix<cplx, kControls, 3> jp = pinv(jac);
        const CVecX null_part = w - jp * (jac * w);
        if (null_part.norm() <= 1e-10 * (1.0 + w.norm())) break;
        bool moved = false;
        double alpha = 1.0;
        for (int ls = 0; ls < 12 && !moved; ++ls, alpha *= 0.5) {
          CVecX trial = w - alpha * null_part;
          const double r2 = polish(goal, trial, tol);
          if (r2 <= accept && trial.norm() < w.norm()) {
            w = trial;
            res = r2;
            moved = true;
          }
        }
        if (!moved) break;
      }
      return res <= accept;
    };

    // continuation in t with step halving
    std::vector<CVecX> ws(static_cast<size_t>(opt.n_t), CVecX::Zero(kControls));
    std::vector<double> ts(static_cast<size_t>(opt.n_t));
    for (int i = 0; i < opt.n_t; ++i) ts[static_cast<size_t>(i)] = static_cast<double>(i) / (opt.n_t - 1);
    CVecX w = CVecX::Zero(kControls), w_prev = w;
    double t_prev = 0.0, dt_prev = 0.0;
    for (int i = 1; i < opt.n_t; ++i) {
      const double t_goal = ts[static_cast<size_t>(i)];
      double h = t_goal - t_prev;
      int depth = 0;
      while (t_prev < t_goal) {
        const double t = std::min(t_goal, t_prev + h);
        CVecX guess = w;
        if (dt_prev > 0.0) guess += (t - t_prev) / dt_prev * (w - w_prev);
        // predictor, previous solution, then a fresh start from zero controls
        bool ok = false;
        for (const CVecX& start : {guess, w, CVecX(CVecX::Zero(kControls))}) {
          CVecX trial = start;
          if (newton(t, trial)) {
            w_prev = w;
            dt_prev = t - t_prev;
            w = trial;
            t_prev = t;
            ok = true;
            break;
          }
        }
        if (!ok) {
          if (++depth > opt.max_halvings)
            throw Error(ErrorCode::ContinuationStalled, "period continuation stalled at t = " + std::to_string(t));
          h *= 0.5;
        }
      }
      ws[static_cast<size_t>(i)] = w;
    }

    // loops of the continuation
    std::vector<std::vector<CVec3>> loops(static_cast<size_t>(opt.n_t));
    loops[0] = base;
    for (int i = 1; i < opt.n_t; ++i) {
      auto s = bent(ts[static_cast<size_t>(i)]);
      if (!(control.min_norm(ws[static_cast<size_t>(i)]) > 1e-8 * scale))
        throw Error(ErrorCode::NotImmersion, "period continuation passed through a zero of the loop");
      control.apply(ws[static_cast<size_t>(i)], s);
      loops[static_cast<size_t>(i)] = std::move(s);
    }

    // place the compensation bump where the device is best conditioned
    Segment best_b = make_segment(lay.L.a + delta, delta);
    double best_q = -1.0;
    const int probes[3] = {1, opt.n_t / 2, opt.n_t - 1};
    for (int c = 0; c < 16; ++c) {
      const double a = lay.L.a + delta + c * (lay.L.length() - 3.0 * delta) / 15.0;
      const Segment cand = make_segment(a, delta);
      double q = std::numeric_limits<double>::infinity();
      for (int pi : probes) {
        const Device dev(A, cand, loops[static_cast<size_t>(std::max(pi, 1))]);
        q = std::min(q, rel_sv_min(dev.jacobian(Vec3::Zero(), 1e-4)));
      }
      if (q > best_q) {
        best_q = q;
        best_b = cand;
      }
    }

    PairFamily fam;
    fam.J = lay.J;
    fam.L = lay.L;
    fam.compensation = best_b;
    fam.t = ts;
    fam.min_nonflat_ratio = std::numeric_limits<double>::infinity();
    fam.pairs.push_back(p0);
    fam.correction_p.push_back(Vec3::Zero());
    fam.control_norm.push_back(0.0);
    fam.max_conf_residual = std::max(r0.orthogonality, r0.length);
    bool nonflat_ok = true;
    Vec3 p = Vec3::Zero();
    for (int i = 1; i < opt.n_t; ++i) {
      const double t = ts[static_cast<size_t>(i)];
      std::vector<CVec3> s = loops[static_cast<size_t>(i)];
      const Device dev(A, best_b, s);
      Vec3 gsum = Vec3::Zero();
      for (const auto& z : s) gsum += z.imag();
      const Vec3 goal = ((1.0 - t) * v0 + t * v) * static_cast<double>(n) - gsum;
      Vec3 res = dev.delta_sum(p) - goal;
      for (int it = 0; it < 8 && res.norm() > 1e-15 * scale * n; ++it) {
        const Eigen::Matrix3d j = dev.jacobian(p, 1e-6);
        const Vec3 np = p - j.colPivHouseholderQr().solve(res);
        const Vec3 nres = dev.delta_sum(np) - goal;
        if (!(nres.norm() < res.norm())) break;
        p = np;
        res = nres;
      }
      dev.delta_sum(p, &s);

      std::vector<Vec3> re(static_cast<size_t>(n)), im(re.size());
      for (size_t k = 0; k < re.size(); ++k) {
        re[k] = real_part(s[k]);
        im[k] = s[k].imag();
      }
      RealPath dh(std::move(re)), g(std::move(im));
      RealPath diff = dh - p0.dh;
      RealPath hd = diff.antiderivative();
      const Vec3 shift = hd[anchor];
      std::vector<Vec3> h(static_cast<size_t>(n));
      for (int k = 0; k < n; ++k) h[static_cast<size_t>(k)] = p0.h[k] + hd[k] - shift;
      for (int k : fixed_idx) {
        if ((h[static_cast<size_t>(k)] - p0.h[k]).norm() > 1e-9 * (1.0 + scale))
          throw Error(ErrorCode::InvalidPair, "family moved the fixed segment");
        h[static_cast<size_t>(k)] = p0.h[k];
      }
      ConformalPair pair{RealPath(std::move(h)), std::move(dh), std::move(g)};
      const PairResiduals r = pair_residuals(pair);
      fam.max_conf_residual = std::max({fam.max_conf_residual, r.orthogonality, r.length});
      const double ratio = nonflat_ratio(pair.h, nonflat_on);
      fam.min_nonflat_ratio = std::min(fam.min_nonflat_ratio, ratio);
      if (!(ratio > 1e-8)) nonflat_ok = false;
      fam.correction_p.push_back(p);
      fam.control_norm.push_back(ws[static_cast<size_t>(i)].norm());
      fam.pairs.push_back(std::move(pair));
    }
    if (!nonflat_ok && opt.enforce_nonflat) continue;
    fam.nonflat_ok = nonflat_ok;
    fam.final_period_error = (fam.pairs.back().g.mean() - v).norm();
    if (fam.final_period_error > opt.tol_period)
      throw Error(ErrorCode::RootNotFound,
                  "final period error " + std::to_string(fam.final_period_error) + " exceeds tolerance");
    return fam;
  }
  throw Error(ErrorCode::NonflatViolated, "nonflatness on the protected segment could not be restored");
}

}  // namespace cmi
