#include "cmi/weierstrass.hpp"

#include <cmath>

#include <Eigen/SVD>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace cmi {

CVec3 WeierstrassData::f(cplx z) const { return assemble_f(g(z), f3(z)); }

CVec3 WeierstrassData::form(cplx z) const { return f(z) * theta(z); }

HoloForm WeierstrassData::as_form() const {
  const WeierstrassData copy = *this;
  return [copy](cplx z) { return copy.form(z); };
}

NullPoint assemble_f(cplx g, cplx f3) {
  if (g == 0.0) throw Error(ErrorCode::GaussMapVanishes, "g vanishes");
  const cplx ig = 1.0 / g;
  return CVec3(0.5 * (ig - g), 0.5 * kI * (ig + g), 1.0) * f3;
}

std::vector<CVec3> assemble_f(const WeierstrassData& d, const std::vector<cplx>& grid, double g_min) {
  std::vector<CVec3> out;
  out.reserve(grid.size());
  for (cplx z : grid) {
    const cplx g = d.g(z);
    if (!(std::abs(g) >= g_min))
      throw Error(ErrorCode::GaussMapVanishes, "|g| below threshold on the grid");
    out.push_back(assemble_f(g, d.f3(z)));
  }
  return out;
}

cplx gauss_map(const CVec3& f) { return f(2) / (f(0) - kI * f(1)); }

std::vector<cplx> gauss_map(const std::vector<CVec3>& f, double rel_threshold) {
  std::vector<cplx> out;
  out.reserve(f.size());
  size_t bad = 0;
  for (const auto& v : f) {
    const cplx den = v(0) - kI * v(1);
    if (std::abs(den) < rel_threshold * v.norm()) {
      ++bad;
      out.push_back(cplx(std::nan(""), std::nan("")));
    } else {
      out.push_back(v(2) / den);
    }
  }
  if (bad > f.size() / 100)
    throw Error(ErrorCode::DegenerateDenominator, std::to_string(bad) + " samples with f1 - i f2 near zero");
  return out;
}

double metric_density(const WeierstrassData& d, cplx z) { return 0.5 * d.form(z).squaredNorm(); }

double metric_density(const HoloForm& form, cplx z) { return 0.5 * form(z).squaredNorm(); }

double metric_density_from_gauss(cplx g, cplx f3, cplx theta) {
  const double a = 1.0 / std::abs(g) + std::abs(g);
  return 0.25 * a * a * std::norm(f3) * std::norm(theta);
}

CVec3 loop_period(const HoloForm& form, const CurveChart& c, double tol) {
  CVec3 prev = CVec3::Zero();
  CVec3 acc = CVec3::Zero();
  int n = 128;
  // start with the coarse sum, then add the odd nodes at each refinement
  for (int k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) / n;
    acc += form(c.z(x)) * c.dz(x);
  }
  prev = acc / static_cast<double>(n);
  for (; n <= (1 << 17); n *= 2) {
    for (int k = 0; k < n; ++k) {
      const double x = (k + 0.5) / n;
      acc += form(c.z(x)) * c.dz(x);
    }
    const CVec3 cur = acc / static_cast<double>(2 * n);
    if ((cur - prev).norm() <= tol * (1.0 + cur.norm())) return cur;
    prev = cur;
  }
  return prev;
}

Vec3 flux(const HoloForm& form, const CurveChart& c) { return loop_period(form, c).imag(); }

Vec3 flux(const WeierstrassData& d, const CurveChart& c) { return flux(d.as_form(), c); }

PathPiece PathPiece::line(cplx a, cplx b) {
  return {[a, b](double s) { return a + s * (b - a); }, [a, b](double) { return b - a; }};
}

PathPiece PathPiece::arc(cplx center, double radius, double phi0, double phi1) {
  return {[=](double s) { return center + std::polar(radius, phi0 + s * (phi1 - phi0)); },
          [=](double s) { return kI * (phi1 - phi0) * std::polar(radius, phi0 + s * (phi1 - phi0)); }};
}

namespace {

bool path_inside(const CircularDomain& d, const std::vector<PathPiece>& path) {
  for (const auto& p : path)
    for (int k = 0; k <= 200; ++k)
      if (!d.contains(p.z(k / 200.0))) return false;
  return true;
}

}  // namespace

std::vector<PathPiece> default_path(const CircularDomain& d, cplx a, cplx b) {
  if (!d.contains(a) || !d.contains(b)) throw Error(ErrorCode::InvalidArgument, "path endpoint outside the domain");
  if (a == b) return {};
  const cplx c = d.outer.center;
  const double ra = std::abs(a - c), rb = std::abs(b - c);
  const double pa = std::arg(a - c);
  double dp = std::arg(b - c) - pa;
  dp -= kTwoPi * std::round(dp / kTwoPi);
  std::vector<std::vector<PathPiece>> options;
  options.push_back({PathPiece::line(a, b)});
  options.push_back({PathPiece::arc(c, ra, pa, pa + dp), PathPiece::line(c + std::polar(ra, pa + dp), b)});
  options.push_back({PathPiece::line(a, c + std::polar(rb, pa)), PathPiece::arc(c, rb, pa, pa + dp)});
  const double other = dp > 0 ? dp - kTwoPi : dp + kTwoPi;
  options.push_back({PathPiece::arc(c, ra, pa, pa + other), PathPiece::line(c + std::polar(ra, pa + other), b)});
  for (auto& o : options)
    if (path_inside(d, o)) return o;
  throw Error(ErrorCode::InvalidArgument, "no simple path between the points inside the domain");
}

Vec3 integrate_immersion(const HoloForm& form, const std::vector<CurveChart>& generators, cplx basepoint,
                         const Vec3& value, cplx target, const std::vector<PathPiece>& path, double tol_period) {
  for (size_t j = 0; j < generators.size(); ++j) {
    const Vec3 re = loop_period(form, generators[j]).real();
    if (re.norm() > tol_period)
      throw Error(ErrorCode::RealPeriodNonzero,
                  "real period " + std::to_string(re.norm()) + " on generator " + std::to_string(j));
  }
  cplx at = basepoint;
  Vec3 u = value;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  for (const auto& piece : path) {
    if (std::abs(piece.z(0.0) - at) > 1e-12 * (1.0 + std::abs(at)))
      throw Error(ErrorCode::InvalidArgument, "path pieces are not connected");
    for (int i = 0; i < 3; ++i) {
      auto integrand = [&](double s) { return (form(piece.z(s))(i) * piece.dz(s)).real(); };
      u(i) += GK::integrate(integrand, 0.0, 1.0, 12, 1e-14);
    }
    at = piece.z(1.0);
  }
  if (std::abs(at - target) > 1e-12 * (1.0 + std::abs(target)))
    throw Error(ErrorCode::InvalidArgument, "path does not end at the target");
  return u;
}

double conformality_residual(const std::vector<CVec3>& f) {
  double r = 0.0;
  for (const auto& v : f) {
    const double n2 = v.squaredNorm();
    if (n2 > 0.0) r = std::max(r, std::abs(null_residual(v)) / n2);
  }
  return r;
}

double conformality_residual(const HoloForm& form, const std::vector<cplx>& grid) {
  std::vector<CVec3> f;
  f.reserve(grid.size());
  for (cplx z : grid) f.push_back(form(z));
  return conformality_residual(f);
}

FlatCheck is_flat(const std::vector<CVec3>& f, double rel_threshold) {
  FlatCheck out;
  if (f.empty()) return out;
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(f.size()), 3);
  for (size_t i = 0; i < f.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = f[i].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (!(sv(0) > 0.0)) return out;
  out.ratio = sv(1) / sv(0);
  out.flat = out.ratio < rel_threshold;
  CVec3 ray = svd.matrixV().col(0).conjugate();
  int big = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(ray(i)) >= std::abs(ray(big)) * (1.0 - 1e-12)) big = i;
  out.ray = ray / ray(big);
  return out;
}

FlatCheck is_flat(const WeierstrassData& d, const std::vector<cplx>& grid, double rel_threshold) {
  return is_flat(assemble_f(d, grid), rel_threshold);
}

CircularDomain default_annulus() { return CircularDomain::annulus(0.5, 2.0); }

std::vector<std::string> catalog_names() {
  return {"catenoid", "enneper_annulus", "flat_exponential", "vertical_plane"};
}

WeierstrassData catalog(const std::string& name) {
  WeierstrassData d;
  if (name == "catenoid") {
    d.g = HoloFunction::monomial(1.0, 1);
    d.f3 = HoloFunction::constant(1.0);
    d.theta = HoloFunction::monomial(1.0, -1);
  } else if (name == "enneper_annulus") {
    d.g = HoloFunction::monomial(1.0, 1);
    d.f3 = HoloFunction::monomial(1.0, 1);
  } else if (name == "flat_exponential") {
    d.g = HoloFunction::constant(1.0);
    // Taylor series of e^z, exact to rounding on |z| <= 2
    LaurentBlock b{0.0, 1.0, 0, {}};
    double c = 1.0;
    for (int k = 0; k <= 60; ++k) {
      b.coeffs.push_back(c);
      c /= (k + 1);
    }
    d.f3 = HoloFunction({b});
  } else if (name == "vertical_plane") {
    d.g = HoloFunction::constant(kI);
    d.f3 = HoloFunction::constant(1.0);
  } else {
    throw Error(ErrorCode::UnknownName, "unknown catalog entry '" + name + "'");
  }
  return d;
}

Vec3 MinimalImmersion::operator()(cplx z) const {
  return integrate_immersion(form, {}, basepoint, value, z, default_path(domain, basepoint, z));
}

MinimalImmersion make_immersion(const HoloForm& form, const CircularDomain& d, cplx basepoint, const Vec3& value,
                                double tol_period) {
  MinimalImmersion m{form, d, basepoint, value, homology_basis(d), {}};
  for (size_t j = 0; j < m.generators.size(); ++j) {
    const CVec3 p = loop_period(form, m.generators[j]);
    if (p.real().norm() > tol_period)
      throw Error(ErrorCode::RealPeriodNonzero,
                  "real period " + std::to_string(p.real().norm()) + " on generator " + std::to_string(j));
    m.flux.push_back(p.imag());
  }
  for (cplx z : verification_grid(d, 16, 64))
    if (!(metric_density(form, z) > 0.0)) throw Error(ErrorCode::NotImmersion, "metric degenerates on the grid");
  return m;
}

}  // namespace cmi
