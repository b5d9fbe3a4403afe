#include "cmi/sprays.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

namespace cmi {

namespace {

// Gaussian cut where it drops below 1e-12.
const double kCut = std::sqrt(2.0 * std::log(1e12));

// Center positions as fractions of the admissible range, tried in order.
const double kPatterns[6][3] = {{0.25, 0.5, 0.75}, {0.0, 0.5, 1.0}, {0.1, 0.4, 0.9},
                                {0.0, 0.33, 0.67}, {0.33, 0.67, 1.0}, {0.15, 0.6, 0.85}};

double wrap_offset(double x, double c) {
  double d = x - c;
  return d - std::round(d);
}

}  // namespace

double SprayControl::bump(double x) const {
  const double u = wrap_offset(x, center) / sd;
  if (std::abs(u) > kCut) return 0.0;
  return std::exp(-0.5 * u * u);
}

Segment SprayControl::support() const {
  double a = center - kCut * sd;
  a -= std::floor(a);
  return Segment(a, a + 2.0 * kCut * sd);
}

std::vector<PeriodicPath> LoopSpray::apply(int t, const Eigen::VectorXcd& w) const {
  if (t < 0 || t >= n_t()) throw Error(ErrorCode::InvalidArgument, "t index out of range");
  if (w.size() != dim_w()) throw Error(ErrorCode::InvalidArgument, "control vector has the wrong size");
  std::vector<PeriodicPath> out = base[static_cast<size_t>(t)];
  for (int j = 0; j < n_curves(); ++j) {
    std::vector<int> mine;
    for (int i = 0; i < dim_w(); ++i)
      if (controls[static_cast<size_t>(i)].curve == j && w(i) != 0.0) mine.push_back(i);
    if (mine.empty()) continue;
    auto& s = out[static_cast<size_t>(j)].samples_mut();
    const int n = static_cast<int>(s.size());
    for (int k = 0; k < n; ++k) {
      const double x = static_cast<double>(k) / n;
      if (fixed_third) {
        cplx e = 0.0;
        bool hit = false;
        for (int i : mine) {
          const double h = controls[static_cast<size_t>(i)].bump(x);
          if (h == 0.0) continue;
          e += w(i) * h;
          hit = true;
        }
        if (!hit) continue;
        CVec3& z = s[static_cast<size_t>(k)];
        const cplx u = std::exp(-e) * (z(0) - kI * z(1));
        const cplx v = std::exp(e) * (z(0) + kI * z(1));
        z(0) = 0.5 * (u + v);
        z(1) = (v - u) / (2.0 * kI);
      } else {
        // phi^1 o phi^2 o ... applied to sigma(x)
        CVec3 z = s[static_cast<size_t>(k)];
        bool hit = false;
        for (auto it = mine.rbegin(); it != mine.rend(); ++it) {
          const SprayControl& c = controls[static_cast<size_t>(*it)];
          const double h = c.bump(x);
          if (h == 0.0) continue;
          hit = true;
          if (c.field == TangentFlow::scaling)
            z *= std::exp(w(*it) * h);
          else
            z = flow_matrix(c.field, w(*it) * h) * z;
        }
        if (hit) s[static_cast<size_t>(k)] = z;
      }
    }
  }
  return out;
}

std::vector<CVec3> LoopSpray::periods(int t, const Eigen::VectorXcd& w) const {
  std::vector<CVec3> out;
  for (const auto& p : apply(t, w)) out.push_back(period(p));
  return out;
}

Eigen::MatrixXcd period_jacobian(const LoopSpray& s, int t, const Eigen::VectorXcd& w_in) {
  const int rows = s.n_curves() * s.rows_per_curve();
  const int cols = s.dim_w();
  Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(rows, cols);
  if (rows == 0 || cols == 0) return jac;
  const Eigen::VectorXcd w = w_in.size() == 0 ? Eigen::VectorXcd::Zero(cols) : w_in;
  // five-point stencil; the periods are holomorphic in w, so a real step suffices
  const double h = 1e-3 * s.radius_w;
  for (int i = 0; i < cols; ++i) {
    std::vector<std::vector<CVec3>> p;
    for (double m : {-2.0, -1.0, 1.0, 2.0}) {
      Eigen::VectorXcd wm = w;
      wm(i) += m * h;
      p.push_back(s.periods(t, wm));
    }
    for (int j = 0; j < s.n_curves(); ++j) {
      const size_t jj = static_cast<size_t>(j);
      for (int c = 0; c < s.rows_per_curve(); ++c)
        jac(j * s.rows_per_curve() + c, i) =
            (p[0][jj](c) - 8.0 * p[1][jj](c) + 8.0 * p[2][jj](c) - p[3][jj](c)) / (12.0 * h);
    }
  }
  return jac;
}

double smallest_singular_value(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues().minCoeff();
}

namespace {

LoopSpray build(const std::vector<std::vector<PeriodicPath>>& sigma_t, const std::vector<Segment>& segments,
                const SprayOptions& opt, bool fixed_third) {
  if (sigma_t.empty()) throw Error(ErrorCode::InvalidArgument, "empty loop family");
  const size_t l = sigma_t.front().size();
  if (segments.size() != l) throw Error(ErrorCode::InvalidArgument, "need one segment per curve");
  for (const auto& row : sigma_t)
    if (row.size() != l) throw Error(ErrorCode::InvalidArgument, "ragged loop family");

  for (size_t j = 0; j < l; ++j) {
    for (size_t t = 0; t < sigma_t.size(); ++t) {
      const PeriodicPath& p = sigma_t[t][j];
      if (fixed_third) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int k = 0; k < p.size(); ++k) {
          hi = std::max(hi, p[k].norm());
          if (segments[j].contains(p.x(k))) lo = std::min(lo, std::abs(p[k](2)));
        }
        if (!(lo > 1e-8 * hi))
          throw Error(ErrorCode::ThirdComponentVanishes,
                      "third component vanishes on curve " + std::to_string(j) + " at t-sample " + std::to_string(t));
      } else if (!nondegenerate_on(p, segments[j])) {
        throw Error(ErrorCode::DegenerateLoop,
                    "loop " + std::to_string(j) + " is degenerate at t-sample " + std::to_string(t));
      }
    }
  }

  LoopSpray s;
  s.base = sigma_t;
  s.fixed_third = fixed_third;
  s.radius_w = opt.radius_w;
  const TangentFlow field = fixed_third ? TangentFlow::rotation_12 : TangentFlow::scaling;
  const int attempts = std::min(opt.max_retries + 1, 6);
  for (size_t j = 0; j < l; ++j) {
    const Segment& seg = segments[j];
    const double half = std::min(opt.bump_std * kCut, 0.3 * seg.length());
    const double sd = half / kCut;
    const double lo = seg.a + half, range = seg.length() - 2.0 * half;
    bool ok = false;
    double best = 0.0;
    for (int r = 0; r < attempts && !ok; ++r) {
      // the curve's controls alone, evaluated on that curve
      LoopSpray trial;
      trial.fixed_third = fixed_third;
      trial.radius_w = opt.radius_w;
      for (int i = 0; i < 3; ++i) {
        double c = lo + kPatterns[r][i] * range;
        c -= std::floor(c);
        trial.controls.push_back({0, field, c, sd});
      }
      double worst = std::numeric_limits<double>::infinity();
      for (size_t t = 0; t < sigma_t.size(); ++t) {
        trial.base = {{sigma_t[t][j]}};
        worst = std::min(worst, smallest_singular_value(period_jacobian(trial, 0)));
        if (worst < opt.sigma_min_threshold) break;
      }
      best = std::max(best, worst);
      if (worst >= opt.sigma_min_threshold) {
        ok = true;
        for (auto c : trial.controls) {
          c.curve = static_cast<int>(j);
          s.controls.push_back(c);
        }
      }
    }
    if (!ok)
      throw Error(ErrorCode::DominationFailed, "smallest singular value " + std::to_string(best) + " on curve " +
                                                   std::to_string(j) + " below threshold");
  }
  return s;
}

}  // namespace

LoopSpray build_spray(const std::vector<std::vector<PeriodicPath>>& sigma_t, const std::vector<Segment>& segments,
                      const SprayOptions& opt) {
  return build(sigma_t, segments, opt, false);
}

LoopSpray build_spray_fixed_third(const std::vector<std::vector<PeriodicPath>>& sigma_t,
                                  const std::vector<Segment>& segments, const SprayOptions& opt) {
  return build(sigma_t, segments, opt, true);
}

namespace {

Eigen::VectorXcd stack(const std::vector<CVec3>& p, const std::vector<CVec3>& target, int rows) {
  Eigen::VectorXcd r(static_cast<Eigen::Index>(p.size()) * rows);
  for (size_t j = 0; j < p.size(); ++j)
    for (int c = 0; c < rows; ++c) r(static_cast<Eigen::Index>(j) * rows + c) = p[j](c) - target[j](c);
  return r;
}

double residual_norm(const Eigen::VectorXcd& r, int rows) {
  double m = 0.0;
  for (Eigen::Index j = 0; j < r.size() / rows; ++j) m = std::max(m, r.segment(j * rows, rows).norm());
  return m;
}

}  // namespace

SolveResult solve_w(const LoopSpray& s, const PeriodTargets& targets, const SolveOptions& opt,
                    const PeriodMap& realize) {
  if (static_cast<int>(targets.size()) != s.n_t())
    throw Error(ErrorCode::InvalidArgument, "need one target per t-sample");
  const int rows = s.rows_per_curve();
  const int n = s.dim_w();
  auto periods = [&](int t, const Eigen::VectorXcd& w) {
    return realize ? realize(t, s.apply(t, w)) : s.periods(t, w);
  };
  auto residual = [&](int t, const Eigen::VectorXcd& w, const std::vector<CVec3>& target) {
    return stack(periods(t, w), target, rows);
  };

  SolveResult out;
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(n);
  {
    const double r0 = residual_norm(residual(0, w, targets[0]), rows);
    if (r0 > opt.tol_period)
      throw Error(ErrorCode::InvalidArgument, "targets do not match the periods at t = 0 (residual " +
                                                  std::to_string(r0) + ")");
    out.w.push_back(w);
    out.residual.push_back(r0);
  }

  for (int t = 1; t < s.n_t(); ++t) {
    const std::vector<CVec3>& goal = targets[static_cast<size_t>(t)];
    const Eigen::VectorXcd r_start = residual(t, w, goal);
    double res = residual_norm(r_start, rows);
    if (res > opt.tol_period) {
      // homotopy from the residual at the previous w to zero
      double s_done = 0.0, ds = 1.0;
      int halvings = 0;
      while (s_done < 1.0) {
        const double s_try = std::min(1.0, s_done + ds);
        const Eigen::VectorXcd offset = (1.0 - s_try) * r_start;
        Eigen::VectorXcd wt = w;
        Eigen::VectorXcd r = residual(t, wt, goal) - offset;
        double rn = residual_norm(r, rows);
        const double tol = s_try < 1.0 ? std::max(opt.tol_period, 1e-3 * residual_norm(r_start, rows)) : opt.tol_period;
        bool converged = rn <= tol;
        for (int it = 0; it < opt.max_iterations && !converged; ++it) {
          ++out.newton_iterations;
          const Eigen::MatrixXcd jac = period_jacobian(s, t, wt);
          const Eigen::MatrixXcd jjh = jac * jac.adjoint();
          const double lam = opt.tikhonov * std::max(1.0, jjh.norm());
          const Eigen::VectorXcd step =
              -jac.adjoint() * (jjh + lam * Eigen::MatrixXcd::Identity(jjh.rows(), jjh.cols())).ldlt().solve(r);
          double alpha = 1.0;
          bool improved = false;
          for (int b = 0; b < 12; ++b, alpha *= 0.5) {
            const Eigen::VectorXcd wn = wt + alpha * step;
            const Eigen::VectorXcd rnew = residual(t, wn, goal) - offset;
            const double nn = residual_norm(rnew, rows);
            if (nn < rn) {
              wt = wn;
              r = rnew;
              rn = nn;
              improved = true;
              break;
            }
          }
          if (!improved) break;
          converged = rn <= tol;
        }
        if (converged) {
          w = wt;
          s_done = s_try;
          res = rn;
          if (w.norm() > s.radius_w)
            throw Error(ErrorCode::LeftDomain, "|w| = " + std::to_string(w.norm()) + " exceeds radius_w at t-sample " +
                                                   std::to_string(t));
        } else {
          ds *= 0.5;
          if (++halvings > opt.max_halvings)
            throw Error(ErrorCode::ContinuationStalled, "continuation stalled at t-sample " + std::to_string(t) +
                                                            " with residual " + std::to_string(rn));
        }
      }
    }
    out.w.push_back(w);
    out.residual.push_back(res);
    out.max_w = std::max(out.max_w, w.norm());
  }
  return out;
}

}  // namespace cmi
