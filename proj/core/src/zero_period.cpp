#include <cmath>
#include <optional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cmi/loops.hpp"

namespace cmi {

namespace {

using boost::math::quadrature::gauss_kronrod;

int next_pow2(double v) {
  int n = 64;
  while (n < v) n *= 2;
  return n;
}

// Integral of f over [lo, hi] restricted to the sample grid cells, accumulated at each sample.
std::vector<double> cumulative(const std::function<double(double)>& f, int n, double lo, double hi) {
  std::vector<double> c(static_cast<size_t>(n), 0.0);
  double acc = 0.0;
  double prev = lo;
  for (int k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) / n;
    if (x > lo) {
      const double b = std::min(x, hi);
      if (b > prev) acc += gauss_kronrod<double, 15>::integrate(f, prev, b, 0, 0.0);
      prev = std::max(prev, b);
    }
    c[static_cast<size_t>(k)] = acc;
  }
  return c;
}

// Minimal rotation taking unit a to unit b, applied to v.
Vec3 transport(const Vec3& a, const Vec3& b, const Vec3& v) {
  const double c = a.dot(b);
  const Vec3 k = a.cross(b);
  return c * v + k.cross(v) + k * (k.dot(v) / (1.0 + c));
}

double principal(double a) { return a - kTwoPi * std::floor((a + kPi) / kTwoPi); }

enum Region { kA, kB, kC, kOut };

constexpr int kOutBumps = 6;

struct Device {
  int n = 0;
  double delta = 0.0;
  RealPath h0;
  std::vector<Vec3> h_flat, dh_flat;
  double s = 0.0;
  Vec3 E1, E2, E3;
  std::vector<double> beta_a, beta_b, cum_d, phi_b, phi_out;
  std::vector<Region> region;
  double kappa = 1.0;
  double out_ref = 0.0;  // branch of the outside angle increment at p = 0
  int last_c = 0;

  struct Eval {
    std::vector<Vec3> dh, g;
    Vec3 integral = Vec3::Zero();
    Vec3 leak = Vec3::Zero();
    Vec3 part_b = Vec3::Zero();
    Vec3 part_out = Vec3::Zero();
    double out_raw = 0.0;
  };

  // Smooth angle modulations: two bumps on B, kOutBumps bumps outside J.
  std::vector<std::vector<double>> w_b, w_out;

  Eval evaluate(const Vec3& p, double eps, int m_b, int m_out, const std::vector<double>& a_b,
                const std::vector<double>& a_out, bool reference = false) const {
    Eval e;
    e.dh.resize(static_cast<size_t>(n));
    e.g.resize(static_cast<size_t>(n));
    const Vec3 P = p(0) * E1 + p(1) * E2 + p(2) * E3;
    std::vector<Vec3> T(static_cast<size_t>(n)), nn(static_cast<size_t>(n)), bb(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
      const size_t i = static_cast<size_t>(k);
      e.dh[i] = dh_flat[i] + s * eps * (beta_a[i] - kappa * beta_b[i]) * P;
      T[i] = e.dh[i].normalized();
    }
    nn[0] = (E2 - E2.dot(T[0]) * T[0]).normalized();
    for (size_t i = 1; i < T.size(); ++i) {
      Vec3 v = transport(T[i - 1], T[i], nn[i - 1]);
      nn[i] = (v - v.dot(T[i]) * T[i]).normalized();
    }
    for (size_t i = 0; i < T.size(); ++i) bb[i] = T[i].cross(nn[i]);
    Vec3 n_end = transport(T.back(), T[0], nn.back());
    n_end = (n_end - n_end.dot(T[0]) * T[0]).normalized();
    const double alpha = std::atan2(nn[0].cross(n_end).dot(T[0]), nn[0].dot(n_end));

    const size_t ic = static_cast<size_t>(last_c);
    const Vec3 mE2 = -E2;
    const double psi_start = std::atan2(mE2.dot(bb[ic]), mE2.dot(nn[ic]));
    const double psi_end = -alpha;
    e.out_raw = psi_end - psi_start;
    const double base = reference ? e.out_raw : out_ref + principal(e.out_raw - out_ref);
    const double d_out = base + kTwoPi * m_out;

    for (int k = 0; k < n; ++k) {
      const size_t i = static_cast<size_t>(k);
      const double speed = e.dh[i].norm();
      Vec3 g;
      switch (region[i]) {
        case kA: {
          const double eb = eps * beta_a[i];
          const Vec3 Ap = -p(1) * E1 + p(0) * E2 + p(2) * E3;
          const Vec3 G = E2 + eb * Ap - (eb * eb * p(2) * p(2) / (1.0 + eb * p(0))) * E1;
          g = speed * (G - G.dot(T[i]) * T[i]).normalized();
          break;
        }
        case kB: {
          double psi = std::atan2(E2.dot(bb[i]), E2.dot(nn[i])) + phi_b[i] * (kPi + kTwoPi * m_b);
          for (size_t j = 0; j < a_b.size(); ++j) psi += a_b[j] * w_b[j][i];
          g = speed * (std::cos(psi) * nn[i] + std::sin(psi) * bb[i]);
          break;
        }
        case kC:
          g = speed * (mE2 - mE2.dot(T[i]) * T[i]).normalized();
          break;
        case kOut: {
          double psi = psi_start + phi_out[i] * d_out;
          for (size_t j = 0; j < a_out.size(); ++j) psi += a_out[j] * w_out[j][i];
          g = speed * (std::cos(psi) * nn[i] + std::sin(psi) * bb[i]);
          break;
        }
      }
      e.g[i] = g;
      e.integral += g;
      if (region[i] == kB) e.part_b += g;
      if (region[i] == kOut) e.part_out += g;
    }
    e.integral /= static_cast<double>(n);
    e.part_b /= static_cast<double>(n);
    e.part_out /= static_cast<double>(n);
    e.leak = e.part_b + e.part_out;
    return e;
  }
};

Device setup(const RealPath& h_in, double delta, const ZeroPeriodOptions& opt) {
  Device d;
  d.delta = delta;
  d.n = std::max(h_in.size(), next_pow2(opt.samples_per_inverse_delta / delta));
  d.h0 = h_in.resample(d.n);
  const int n = d.n;
  const RealPath dh0 = d.h0.derivative();

  // Flatten on J = [0, 3 delta] towards the tangent line at the midpoint.
  const double xc = 1.5 * delta;
  const Vec3 P = d.h0.eval(xc);
  const Vec3 T0 = dh0.eval(xc);
  const double collar = 0.5 * delta;
  auto chi = [&](double x) {
    double u = x - std::floor(x);
    if (u > 0.5 + xc) u -= 1.0;
    if (u >= 0.0 && u <= 3 * delta) return std::pair{1.0, 0.0};
    if (u < 0.0) return std::pair{smooth_step((u + collar) / collar), smooth_step_derivative((u + collar) / collar) / collar};
    return std::pair{smooth_step((3 * delta + collar - u) / collar),
                     -smooth_step_derivative((3 * delta + collar - u) / collar) / collar};
  };
  d.h_flat.resize(static_cast<size_t>(n));
  d.dh_flat.resize(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const size_t i = static_cast<size_t>(k);
    const double x = d.h0.x(k);
    double u = x;
    if (u > 0.5 + xc) u -= 1.0;
    const Vec3 line = P + T0 * (u - xc);
    const auto [c, dc] = chi(x);
    d.h_flat[i] = d.h0[k] + c * (line - d.h0[k]);
    d.dh_flat[i] = dh0[k] + dc * (line - d.h0[k]) + c * (T0 - dh0[k]);
    if (c == 1.0) d.dh_flat[i] = T0;
  }
  double min_flat = std::numeric_limits<double>::infinity();
  for (const auto& v : d.dh_flat) min_flat = std::min(min_flat, v.norm());
  if (!(min_flat > 0.0)) throw Error(ErrorCode::NotImmersion, "flattened curve is not immersed; reduce delta");

  d.s = T0.norm();
  d.E1 = T0 / d.s;
  std::tie(d.E2, d.E3) = fiber_frame(d.E1);

  const double r = delta / 10.0;
  const Segment A(0.0, delta), B(delta, 2 * delta), out(3 * delta, 1.0 - 1e-15);
  d.beta_a.resize(static_cast<size_t>(n));
  d.beta_b.resize(static_cast<size_t>(n));
  d.region.resize(static_cast<size_t>(n));
  double sum_a = 0.0, sum_b = 0.0;
  for (int k = 0; k < n; ++k) {
    const size_t i = static_cast<size_t>(k);
    const double x = d.h0.x(k);
    d.beta_a[i] = x <= delta ? plateau(A, r, x) : 0.0;
    d.beta_b[i] = (x >= delta && x <= 2 * delta) ? plateau(B, r, x) : 0.0;
    sum_a += d.beta_a[i];
    sum_b += d.beta_b[i];
    d.region[i] = x < delta ? kA : x < 2 * delta ? kB : x < 3 * delta ? kC : kOut;
    if (d.region[i] == kC) d.last_c = k;
  }
  d.kappa = sum_a / sum_b;
  const double kappa = d.kappa;
  auto bump_d = [&](double x) {
    return (x <= delta ? plateau(A, r, x) : 0.0) - kappa * ((x >= delta && x <= 2 * delta) ? plateau(B, r, x) : 0.0);
  };
  d.cum_d = cumulative(bump_d, n, 0.0, 2 * delta);

  // Normalized angle profiles: trapezoidal angular velocity with smooth ramps of width r.
  auto profile = [&](double lo, double hi) {
    const Segment seg(lo, hi);
    auto v = [&, seg](double x) { return (x >= lo && x <= hi) ? plateau(seg, r, x) : 0.0; };
    std::vector<double> c = cumulative(v, n, lo, hi);
    const double total = gauss_kronrod<double, 31>::integrate(v, lo, hi, 10, 1e-14);
    for (int k = 0; k < n; ++k) {
      const double x = static_cast<double>(k) / n;
      c[static_cast<size_t>(k)] = x < lo ? 0.0 : x > hi ? 1.0 : c[static_cast<size_t>(k)] / total;
    }
    return c;
  };
  d.phi_b = profile(delta, 2 * delta);
  d.phi_out = profile(3 * delta, 1.0 - 1e-12);

  // Modulation bumps, overlapping windows with wide smooth ramps.
  auto windows = [&](double lo, double hi, int count) {
    std::vector<std::vector<double>> w;
    const double len = (hi - lo) / (count + 1);
    for (int j = 0; j < count; ++j) {
      const Segment seg(lo + j * len, lo + (j + 2) * len);
      std::vector<double> col(static_cast<size_t>(n), 0.0);
      for (int k = 0; k < n; ++k) {
        const double x = static_cast<double>(k) / n;
        if (x >= seg.a && x <= seg.b) col[static_cast<size_t>(k)] = plateau(seg, 0.5 * len, x);
      }
      w.push_back(std::move(col));
    }
    return w;
  };
  d.w_b = windows(delta + r, 2 * delta - r, 2);
  d.w_out = windows(3 * delta + r, 1.0 - r, kOutBumps);

  // Branch of the outside angle increment, fixed at p = 0 and followed continuously in p.
  const auto e0 = d.evaluate(Vec3::Zero(), 0.0, 0, 0, {}, {}, true);
  d.out_ref = kPi + principal(e0.out_raw - kPi);
  return d;
}

// Damped least-squares (min-norm) Newton for the modulation amplitudes.
template <class Residual>
std::optional<std::vector<double>> tune(Residual residual, int dim, double scale) {
  std::vector<double> a(static_cast<size_t>(dim), 0.0);
  Eigen::VectorXd r = residual(a);
  double mu = 1e-3;
  for (int it = 0; it < 200; ++it) {
    if (r.norm() <= 1e-15 * scale) return a;
    Eigen::MatrixXd J(r.size(), dim);
    for (int j = 0; j < dim; ++j) {
      auto ap = a, am = a;
      ap[static_cast<size_t>(j)] += 1e-6;
      am[static_cast<size_t>(j)] -= 1e-6;
      J.col(j) = (residual(ap) - residual(am)) / 2e-6;
    }
    bool accepted = false;
    for (int ls = 0; ls < 12; ++ls) {
      const Eigen::MatrixXd JJ = J * J.transpose() + mu * Eigen::MatrixXd::Identity(r.size(), r.size()) * (J.squaredNorm() / dim);
      const Eigen::VectorXd step = -J.transpose() * JJ.ldlt().solve(r);
      auto trial = a;
      for (int j = 0; j < dim; ++j) trial[static_cast<size_t>(j)] += step(j);
      const Eigen::VectorXd rt = residual(trial);
      if (rt.norm() < r.norm()) {
        a = trial;
        r = rt;
        mu = std::max(mu * 0.1, 1e-12);
        accepted = true;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) break;
  }
  if (r.norm() <= 1e-13 * scale) return a;
  return std::nullopt;
}

}  // namespace

ZeroPeriodResult make_zero_period_pair(const RealPath& h0, int spin_class, double delta,
                                       const ZeroPeriodOptions& opt) {
  if (!(delta > 0.0 && 3.0 * delta < 1.0)) throw Error(ErrorCode::InvalidArgument, "need 0 < 3 delta < 1");
  if (!(min_speed(h0) > 0.0)) throw Error(ErrorCode::NotImmersion, "h0 has vanishing derivative");

  const Device dev = setup(h0, delta, opt);
  const int n = dev.n;

  // Reference section: no extra turns and no modulation; its pi1 class fixes the labelling.
  const auto e00 = dev.evaluate(Vec3::Zero(), 0.0, 0, 0, {}, {});
  const int c00 = pi1_class(complexify(RealPath(e00.dh), RealPath(e00.g)));
  const int turns = spin_class + c00;

  std::vector<Vec3> sphere;
  for (int i = 0; i < 3; ++i) {
    sphere.push_back(Vec3::Unit(i));
    sphere.push_back(-Vec3::Unit(i));
  }
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) sphere.push_back(Vec3(sx, sy, sz).normalized());

  // The p-excursion of h' on A and B runs out and back along one great circle, so the
  // transported frame outside J and the outside integral do not depend on p.
  double eps = opt.epsilon0;
  for (int halving = 0; halving <= opt.max_halvings; ++halving, eps *= 0.5) {
    const double bound = eps * delta * dev.s / 3.0;
    for (int m = 0; m <= opt.max_spin; ++m) {
      for (int sign : {1, -1}) {
        if (m == 0 && sign < 0) continue;
        const int m_b = sign * m, m_out = turns - m_b;
        auto res_out = [&](const std::vector<double>& a) {
          return Eigen::VectorXd(dev.evaluate(Vec3::Zero(), 0.0, m_b, m_out, {0.0, 0.0}, a).part_out);
        };
        const auto a_out = tune(res_out, kOutBumps, dev.s);
        if (!a_out) continue;
        auto res_b = [&](const std::vector<double>& a) {
          const Vec3 v = dev.evaluate(Vec3::Zero(), 0.0, m_b, m_out, a, *a_out).part_b;
          return Eigen::VectorXd(Eigen::Vector2d(v.dot(dev.E2), v.dot(dev.E3)));
        };
        const auto a_b = tune(res_b, 2, dev.s);
        if (!a_b) continue;

        double leak = 0.0;
        for (const auto& q : sphere) leak = std::max(leak, dev.evaluate(q, eps, m_b, m_out, *a_b, *a_out).leak.norm());
        if (!(leak < bound)) continue;

        auto F = [&](const Vec3& p) { return dev.evaluate(p, eps, m_b, m_out, *a_b, *a_out).integral; };
        auto newton = [&](Vec3 p) -> std::optional<Vec3> {
          Vec3 f = F(p);
          for (int it = 0; it < 50; ++it) {
            if (f.norm() <= 1e-15 * dev.s) break;
            Eigen::Matrix3d J;
            const double h = 1e-6;
            for (int j = 0; j < 3; ++j) {
              Vec3 dp = Vec3::Zero();
              dp(j) = h;
              J.col(j) = (F(p + dp) - F(p - dp)) / (2 * h);
            }
            const Vec3 step = J.fullPivLu().solve(-f);
            double lam = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
              const Vec3 q = p + lam * step;
              if (q.norm() >= 1.0) continue;
              const Vec3 fq = F(q);
              if (fq.norm() < f.norm()) {
                p = q;
                f = fq;
                accepted = true;
                break;
              }
            }
            if (!accepted) break;
          }
          if (f.norm() <= 1e-12 * dev.s && p.norm() < 1.0) return p;
          return std::nullopt;
        };

        std::optional<Vec3> root = newton(Vec3::Zero());
        if (!root) {
          // grid fallback over the ball at spacing 0.05
          Vec3 best = Vec3::Zero();
          double best_val = std::numeric_limits<double>::infinity();
          for (double a = -0.95; a < 0.96; a += 0.05)
            for (double b = -0.95; b < 0.96; b += 0.05)
              for (double c = -0.95; c < 0.96; c += 0.05) {
                const Vec3 q(a, b, c);
                if (q.norm() >= 1.0) continue;
                const double v = F(q).norm();
                if (v < best_val) {
                  best_val = v;
                  best = q;
                }
              }
          root = newton(best);
        }
        if (!root) break;  // retry with a smaller epsilon

        const auto e = dev.evaluate(*root, eps, m_b, m_out, *a_b, *a_out);
        ZeroPeriodResult res;
        std::vector<Vec3> h(static_cast<size_t>(n));
        const Vec3 P = (*root)(0) * dev.E1 + (*root)(1) * dev.E2 + (*root)(2) * dev.E3;
        for (int k = 0; k < n; ++k) {
          const size_t i = static_cast<size_t>(k);
          h[i] = dev.h_flat[i] + dev.s * eps * dev.cum_d[i] * P;
          res.sup_distance = std::max(res.sup_distance, (h[i] - dev.h0[k]).norm());
        }
        res.pair = ConformalPair{RealPath(std::move(h)), RealPath(e.dh), RealPath(e.g)};
        res.epsilon = eps;
        res.p = *root;
        res.spin_turns_b = m_b;
        res.spin_turns_out = m_out;
        res.leak = leak;
        res.pi1 = pi1_class(complexify(res.pair.dh, res.pair.g));
        if (res.pi1 != ((spin_class % 2) + 2) % 2)
          throw Error(ErrorCode::InvalidPair, "spin class bookkeeping mismatch");
        return res;
      }
    }
  }
  throw Error(ErrorCode::RootNotFound, "no zero of the period map found after epsilon halving");
}

}  // namespace cmi
