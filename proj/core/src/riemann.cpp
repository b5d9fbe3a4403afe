#include "cmi/riemann.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/QR>
#include <unsupported/Eigen/FFT>

#include "cmi/nullquadric.hpp"

namespace cmi {

cplx SpinorMap::q2(cplx z) const {
  cplx q = 1.0;
  for (size_t j = 0; j < tags.size(); ++j)
    if (tags[j] != 0) q *= z - domain.holes[j].center;
  return q;
}

CVec3 SpinorMap::operator()(cplx z) const {
  const cplx a = A(z), b = B(z);
  return spinor_to_null({a, b}) * q2(z);
}

HoloForm SpinorMap::as_form() const {
  const SpinorMap copy = *this;
  return [copy](cplx z) { return copy(z); };
}

PeriodicPath restrict_to_curve(const HoloForm& form, const CurveChart& c, int n) {
  if (!is_power_of_two(n) || n < 64) throw Error(ErrorCode::InvalidArgument, "sample count must be a power of two >= 64");
  std::vector<CVec3> s(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) / n;
    s[static_cast<size_t>(k)] = form(c.z(x)) * c.dz(x);
  }
  return PeriodicPath(std::move(s));
}

namespace {

// Spinor values (A, B) of one curve, at the chart samples.
struct CurveData {
  std::vector<cplx> z;
  std::vector<cplx> a, b;
  std::vector<cplx> rho2;  // dz/dx q^2
  double scale = 0.0;      // max |sigma|
  double spin_scale = 0.0;  // max |(A, B)| before any base is removed
};

// Continuous square root of the samples, plus its continuation back to x = 1.
std::vector<cplx> continuous_sqrt(const std::vector<cplx>& v) {
  std::vector<cplx> out;
  out.reserve(v.size() + 1);
  out.push_back(std::sqrt(v[0]));
  for (size_t k = 1; k <= v.size(); ++k) {
    cplx s = std::sqrt(v[k % v.size()]);
    if (std::real(std::conj(out.back()) * s) < 0.0) s = -s;
    out.push_back(s);
  }
  return out;
}

struct Fit {
  HoloFunction a, b;
};

// Single hole: truncated Laurent series about the hole center, read off the FFT.
class FourierFit {
 public:
  FourierFit(const CurveData& c, const CurveChart& chart) : center_(chart.center), radius_(chart.radius) {
    Eigen::FFT<double> fft;
    fft.fwd(ca_, c.a);
    fft.fwd(cb_, c.b);
    const double n = static_cast<double>(c.a.size());
    // coefficients at rounding level would be amplified by (R / r)^k off the curve
    const double noise = 1e-15 * c.spin_scale;
    for (auto& v : ca_) v = std::abs(v /= n) <= noise ? 0.0 : v;
    for (auto& v : cb_) v = std::abs(v /= n) <= noise ? 0.0 : v;
  }

  Fit at(int deg) const {
    return {block(ca_, deg), block(cb_, deg)};
  }

 private:
  HoloFunction block(const std::vector<cplx>& c, int deg) const {
    const int n = static_cast<int>(c.size());
    LaurentBlock b{center_, radius_, -deg, std::vector<cplx>(static_cast<size_t>(2 * deg + 1))};
    for (int m = -deg; m <= deg; ++m) b.coeffs[static_cast<size_t>(m + deg)] = c[static_cast<size_t>((m + n) % n)];
    return HoloFunction({b});
  }

  cplx center_;
  double radius_;
  std::vector<cplx> ca_, cb_;
};

// Several holes: least squares over a Taylor block at the outer center and a principal
// part at each hole center.
using LsSolver = Eigen::ColPivHouseholderQR<Eigen::MatrixXcd>;

// The least-squares matrix depends only on the sample points and the degree, so its
// factorization is shared between calls.
std::shared_ptr<const LsSolver> ls_solver(const std::vector<CurveData>& curves, const CircularDomain& d, int deg) {
  std::ostringstream key;
  key.precision(17);
  key << deg << ' ' << d.outer.center << ' ' << d.outer.radius;
  for (const auto& h : d.holes) key << ' ' << h.center << ' ' << h.radius;
  for (const auto& c : curves) key << ' ' << c.z.size() << ' ' << c.z.front() << ' ' << c.z[c.z.size() / 4];
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const LsSolver>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key.str());
    if (it != cache.end()) return it->second;
  }
  const Eigen::Index cols = (deg + 1) + static_cast<Eigen::Index>(d.holes.size()) * deg;
  Eigen::Index rows = 0;
  for (const auto& c : curves) rows += static_cast<Eigen::Index>(c.z.size());
  Eigen::MatrixXcd m(rows, cols);
  Eigen::Index r = 0;
  for (const auto& c : curves) {
    // weight so every curve counts the same
    const double wgt = 1.0 / std::sqrt(static_cast<double>(c.z.size()));
    for (size_t k = 0; k < c.z.size(); ++k, ++r) {
      const cplx z = c.z[k];
      const cplx w = (z - d.outer.center) / d.outer.radius;
      cplx p = wgt;
      for (int e = 0; e <= deg; ++e, p *= w) m(r, e) = p;
      Eigen::Index col = deg + 1;
      for (const auto& h : d.holes) {
        const cplx iw = h.radius / (z - h.center);
        cplx q = iw * wgt;
        for (int e = 1; e <= deg; ++e, q *= iw) m(r, col++) = q;
      }
    }
  }
  auto solver = std::make_shared<const LsSolver>(m);
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() > 64) cache.clear();
  cache.emplace(key.str(), solver);
  return solver;
}

Fit least_squares_fit(const std::vector<CurveData>& curves, const CircularDomain& d, int deg) {
  const auto solver = ls_solver(curves, d, deg);
  Eigen::MatrixXcd rhs(solver->rows(), 2);
  Eigen::Index r = 0;
  for (const auto& c : curves) {
    const double wgt = 1.0 / std::sqrt(static_cast<double>(c.z.size()));
    for (size_t k = 0; k < c.z.size(); ++k, ++r) {
      rhs(r, 0) = c.a[k] * wgt;
      rhs(r, 1) = c.b[k] * wgt;
    }
  }
  const Eigen::MatrixXcd sol = solver->solve(rhs);
  Fit out;
  for (int f = 0; f < 2; ++f) {
    HoloFunction h;
    LaurentBlock taylor{d.outer.center, d.outer.radius, 0, {}};
    for (int e = 0; e <= deg; ++e) taylor.coeffs.push_back(sol(e, f));
    h.add_block(taylor);
    Eigen::Index col = deg + 1;
    for (const auto& hole : d.holes) {
      LaurentBlock pp{hole.center, hole.radius, -deg, std::vector<cplx>(static_cast<size_t>(deg))};
      // coefficient of (radius / (z - c))^e sits at exponent -e
      for (int e = 1; e <= deg; ++e) pp.coeffs[static_cast<size_t>(deg - e)] = sol(col++, f);
      h.add_block(pp);
    }
    (f == 0 ? out.a : out.b) = h;
  }
  return out;
}

// Newton on one spinor component from z0; true if it lands on a point of the domain where the
// other component vanishes too.
bool common_zero(const SpinorMap& m, cplx z0, double scale) {
  for (int which = 0; which < 2; ++which) {
    const HoloFunction& f = which == 0 ? m.A : m.B;
    const HoloFunction& other = which == 0 ? m.B : m.A;
    cplx z = z0;
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      const cplx d = f.derivative(z);
      if (d == 0.0) break;
      const cplx step = f(z) / d;
      z -= step;
      if (!m.domain.contains(z)) break;
      if (std::abs(step) <= 1e-14 * (1.0 + std::abs(z))) {
        ok = true;
        break;
      }
    }
    if (ok && m.domain.contains(z) && std::abs(other(z)) <= 1e-8 * scale && std::abs(f(z)) <= 1e-8 * scale)
      return true;
  }
  return false;
}

}  // namespace

RungeResult runge_extend(const std::vector<PeriodicPath>& loops, const CircularDomain& d,
                         const std::vector<CurveChart>& charts, const SpinorMap* reference,
                         const RungeOptions& opt, const SpinorMap* base) {
  if (loops.size() != charts.size() || loops.size() != d.holes.size())
    throw Error(ErrorCode::InvalidArgument, "need one loop per hole and chart");
  if (loops.empty()) throw Error(ErrorCode::InvalidArgument, "domain without holes");
  if (opt.min_degree < 1 || opt.max_degree < opt.min_degree)
    throw Error(ErrorCode::InvalidArgument, "bad degree range");

  SpinorMap map;
  map.domain = d;
  map.tags.resize(loops.size());
  std::vector<CurveData> curves(loops.size());
  std::vector<SpinorLift> lifts;
  for (size_t j = 0; j < loops.size(); ++j) {
    lifts.push_back(lift_loop(loops[j].samples()));
    map.tags[j] = tag_for_class(lifts[j].closes ? 0 : 1);
  }
  if (base && base->tags != map.tags)
    throw Error(ErrorCode::InvalidArgument, "loop classes differ from the base map's parity tags");
  if (!reference) reference = base;
  for (size_t j = 0; j < loops.size(); ++j) {
    const auto& s = loops[j].samples();
    const int n = static_cast<int>(s.size());
    CurveData& c = curves[j];
    c.z.resize(s.size());
    c.rho2.resize(s.size());
    for (int k = 0; k < n; ++k) {
      const double x = static_cast<double>(k) / n;
      c.z[static_cast<size_t>(k)] = charts[j].z(x);
      c.rho2[static_cast<size_t>(k)] = charts[j].dz(x) * map.q2(c.z[static_cast<size_t>(k)]);
      c.scale = std::max(c.scale, s[static_cast<size_t>(k)].norm());
    }
    if (!(c.scale > 0.0)) throw Error(ErrorCode::ZeroPoint, "loop " + std::to_string(j) + " vanishes");
    const std::vector<cplx> rho = continuous_sqrt(c.rho2);
    const SpinorLift& lift = lifts[j];
    if ((std::real(std::conj(rho.front()) * rho.back()) > 0.0) != lift.closes)
      throw Error(ErrorCode::InvalidArgument, "parity tag does not match the loop class on curve " + std::to_string(j));
    c.a.resize(s.size());
    c.b.resize(s.size());
    for (size_t k = 0; k < s.size(); ++k) {
      c.a[k] = lift.lift[k].a / rho[k];
      c.b[k] = lift.lift[k].b / rho[k];
    }
    if (reference && reference->tags == map.tags) {
      double dot = 0.0;
      for (size_t k = 0; k < s.size(); ++k)
        dot += std::real(std::conj(reference->A(c.z[k])) * c.a[k] + std::conj(reference->B(c.z[k])) * c.b[k]);
      if (dot < 0.0) {
        for (auto& v : c.a) v = -v;
        for (auto& v : c.b) v = -v;
      }
    }
    for (size_t k = 0; k < s.size(); ++k) c.spin_scale = std::max(c.spin_scale, std::hypot(std::abs(c.a[k]), std::abs(c.b[k])));
    if (base) {
      for (size_t k = 0; k < s.size(); ++k) {
        c.a[k] -= base->A(c.z[k]);
        c.b[k] -= base->B(c.z[k]);
      }
    }
  }

  std::optional<FourierFit> fourier;
  int cap = opt.max_degree;
  if (loops.size() == 1) {
    fourier.emplace(curves[0], charts[0]);
    cap = std::min(cap, loops[0].size() / 2 - 1);
  }

  bool accurate_somewhere = false;
  double best_err = std::numeric_limits<double>::infinity();
  for (int deg = std::min(opt.min_degree, cap);; deg = std::min(2 * deg, cap)) {
    Fit fit = fourier ? fourier->at(deg) : least_squares_fit(curves, d, deg);
    if (base) {
      map.A = base->A + fit.a;
      map.B = base->B + fit.b;
    } else {
      map.A = std::move(fit.a);
      map.B = std::move(fit.b);
    }

    RungeResult res;
    res.degree = deg;
    double worst = 0.0;
    for (size_t j = 0; j < loops.size(); ++j) {
      double e = 0.0;
      const auto& s = loops[j].samples();
      for (size_t k = 0; k < s.size(); ++k) {
        const CVec3 fz = spinor_to_null({map.A(curves[j].z[k]), map.B(curves[j].z[k])}) * curves[j].rho2[k];
        e = std::max(e, (fz - s[k]).norm());
      }
      res.sup_error.push_back(e / curves[j].scale);
      worst = std::max(worst, e / curves[j].scale);
    }
    best_err = std::min(best_err, worst);

    if (worst <= opt.tol && !opt.check_grid) {
      res.map = std::move(map);
      return res;
    }
    if (worst <= opt.tol) {
      accurate_somewhere = true;
      const int n_theta = std::max(256, 4 * deg);
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0, null_res = 0.0;
      double s_lo = std::numeric_limits<double>::infinity(), s_hi = 0.0;
      cplx z_lo = 0.0;
      for (cplx z : verification_grid(d, opt.grid_r, n_theta)) {
        const cplx a = map.A(z), b = map.B(z);
        const double sn = std::sqrt(std::norm(a) + std::norm(b));
        if (sn < s_lo) {
          s_lo = sn;
          z_lo = z;
        }
        s_hi = std::max(s_hi, sn);
        const CVec3 f = spinor_to_null({a, b}) * map.q2(z);
        const double m = f.norm();
        lo = std::min(lo, m);
        hi = std::max(hi, m);
        if (m > 0.0) null_res = std::max(null_res, std::abs(null_residual(f)) / (m * m));
      }
      res.min_modulus = hi > 0.0 ? lo / hi : 0.0;
      res.max_null_residual = null_res;
      if (res.min_modulus > opt.min_modulus_rel && !common_zero(map, z_lo, s_hi)) {
        res.map = std::move(map);
        return res;
      }
    }
    if (deg >= cap) break;
  }
  if (accurate_somewhere) throw Error(ErrorCode::VanishingOnDomain, "extension vanishes on the domain");
  throw Error(ErrorCode::ApproximationBudgetExceeded,
              "sup error " + std::to_string(best_err) + " above tolerance at degree " + std::to_string(cap));
}

RungeResult spinor_form(const HoloForm& form, const CircularDomain& d, int n, const RungeOptions& opt) {
  const std::vector<CurveChart> charts = homology_basis(d);
  std::vector<PeriodicPath> loops;
  for (const auto& c : charts) loops.push_back(restrict_to_curve(form, c, n));
  return runge_extend(loops, d, charts, nullptr, opt);
}

}  // namespace cmi
