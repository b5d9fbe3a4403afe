#include <random>

#include <gtest/gtest.h>

#include "cmi/weierstrass.hpp"

using namespace cmi;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

HoloFunction random_poly(std::mt19937_64& rng, int lo, int hi) {
  std::normal_distribution<double> nd;
  LaurentBlock b{0.0, 1.0, lo, {}};
  for (int k = lo; k <= hi; ++k) b.coeffs.push_back(cplx(nd(rng), nd(rng)) / (1.0 + std::abs(k)));
  return HoloFunction({b});
}

}  // namespace

TEST(Laurent, EvaluationAndDerivative) {
  LaurentBlock b{cplx(0.5, 0.0), 2.0, -3, {1.0, cplx(0.0, 2.0), -1.0, 3.0, 0.5}};
  const cplx z(1.3, -0.7);
  const cplx w = (z - b.center) / b.scale;
  cplx expect = 0.0;
  for (int k = -3; k <= 1; ++k) expect += b.coeffs[static_cast<size_t>(k + 3)] * std::pow(w, k);
  EXPECT_LE(std::abs(b.eval(z) - expect), 1e-13);
  const cplx h(1e-6, 0.0);
  EXPECT_LE(std::abs(b.derivative(z) - (b.eval(z + h) - b.eval(z - h)) / (2.0 * h)), 1e-7);

  LaurentBlock neg{0.0, 1.0, -4, {2.0, 1.0}};
  EXPECT_LE(std::abs(neg.eval(z) - (2.0 * std::pow(z, -4) + std::pow(z, -3))), 1e-13);
  LaurentBlock pos{0.0, 1.0, 2, {1.0, 1.0}};
  EXPECT_LE(std::abs(pos.eval(z) - (z * z + z * z * z)), 1e-13);

  const HoloFunction f = HoloFunction::monomial(3.0, -1) + HoloFunction::constant(1.0);
  EXPECT_LE(std::abs(f(cplx(2.0, 0.0)) - 2.5), 1e-15);
  EXPECT_EQ(f.degree(), 1);
}

TEST(Domain, AnnulusBasis) {
  const auto basis = homology_basis(default_annulus());
  ASSERT_EQ(basis.size(), 1u);
  EXPECT_NEAR(basis[0].radius, 1.0, 1e-15);
  EXPECT_EQ(basis[0].center, cplx(0.0));
}

TEST(Domain, TwoHoles) {
  const CircularDomain d({0.0, 3.0}, {{cplx(-1.2, 0.0), 0.4}, {cplx(1.0, 0.5), 0.3}});
  const auto basis = homology_basis(d);
  ASSERT_EQ(basis.size(), 2u);
  for (size_t j = 0; j < 2; ++j)
    for (size_t i = 0; i < 2; ++i)
      EXPECT_EQ(winding_number(basis[j], d.holes[i].center), i == j ? 1 : 0);
  EXPECT_GT(std::abs(basis[0].center - basis[1].center), basis[0].radius + basis[1].radius);
  for (const auto& c : basis)
    for (int k = 0; k < 64; ++k) EXPECT_TRUE(d.contains(c.z(k / 64.0)));
}

TEST(Domain, NoHolesAndInvalid) {
  EXPECT_TRUE(homology_basis(CircularDomain({0.0, 1.0}, {})).empty());
  EXPECT_THROW(CircularDomain({0.0, 1.0}, {{0.5, 0.6}}), Error);
  EXPECT_THROW(CircularDomain({0.0, 3.0}, {{-0.5, 0.6}, {0.5, 0.6}}), Error);
  EXPECT_EQ(verification_grid(default_annulus()).size(), 64u * 256u);
}

TEST(AssembleF, Examples) {
  EXPECT_LE((assemble_f(1.0, 1.0) - CVec3(0.0, kI, 1.0)).norm(), 1e-15);
  const WeierstrassData cat = catalog("catenoid");
  EXPECT_LE((cat.f(1.0) - CVec3(0.0, kI, 1.0)).norm(), 1e-15);
  EXPECT_EQ(code_of([] { assemble_f(0.0, 1.0); }), ErrorCode::GaussMapVanishes);
}

TEST(AssembleF, RandomDataIsNull) {
  std::mt19937_64 rng(3);
  const auto grid = verification_grid(default_annulus(), 16, 64);
  for (int trial = 0; trial < 5; ++trial) {
    WeierstrassData d;
    d.g = HoloFunction::monomial(cplx(0.7, 0.2), trial - 2);
    d.f3 = random_poly(rng, -3, 3);
    for (const auto& f : assemble_f(d, grid)) EXPECT_LE(std::abs(null_residual(f)), 1e-12 * (1.0 + f.squaredNorm()));
  }
}

TEST(GaussMap, Examples) {
  EXPECT_LE(std::abs(gauss_map(CVec3(0.0, kI, 1.0)) - 1.0), 1e-15);
  const WeierstrassData cat = catalog("catenoid");
  std::vector<cplx> zs;
  std::vector<CVec3> fs;
  for (int k = 0; k < 256; ++k) {
    zs.push_back(std::polar(1.0, kTwoPi * k / 256.0));
    fs.push_back(cat.f(zs.back()));
  }
  const auto g = gauss_map(fs);
  for (size_t k = 0; k < zs.size(); ++k) EXPECT_LE(std::abs(g[k] - zs[k]), 1e-13);
}

TEST(GaussMap, RoundtripOnGrid) {
  const WeierstrassData cat = catalog("catenoid");
  const auto grid = verification_grid(default_annulus());
  const auto g = gauss_map(assemble_f(cat, grid));
  for (size_t k = 0; k < grid.size(); ++k) EXPECT_LE(std::abs(g[k] - grid[k]), 1e-12 * std::abs(grid[k]));
}

TEST(GaussMap, DegenerateDenominator) {
  std::vector<CVec3> f(100, CVec3(1.0, -kI, 0.0));
  EXPECT_EQ(code_of([&] { gauss_map(f); }), ErrorCode::DegenerateDenominator);
}

TEST(MetricDensity, Examples) {
  const WeierstrassData cat = catalog("catenoid");
  for (int k = 0; k < 16; ++k) EXPECT_NEAR(metric_density(cat, std::polar(1.0, 0.4 * k)), 1.0, 1e-14);
  WeierstrassData flat;
  flat.g = HoloFunction::constant(1.0);
  flat.f3 = HoloFunction::constant(1.0);
  EXPECT_NEAR(metric_density(flat, cplx(0.3, 0.9)), 1.0, 1e-15);
}

TEST(MetricDensity, DualFormulas) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const cplx g(nd(rng), nd(rng)), f3(nd(rng), nd(rng)), th(nd(rng), nd(rng));
    const double a = 0.5 * (assemble_f(g, f3) * th).squaredNorm();
    EXPECT_NEAR(metric_density_from_gauss(g, f3, th), a, 1e-12 * a);
  }
}

TEST(Flux, CatalogExamples) {
  const auto c = homology_basis(default_annulus())[0];
  EXPECT_LE((flux(catalog("catenoid"), c) - Vec3(0.0, 0.0, kTwoPi)).norm(), 1e-10);
  EXPECT_LE(flux(catalog("enneper_annulus"), c).norm(), 1e-12);
  EXPECT_LE(loop_period(catalog("enneper_annulus").as_form(), c).norm(), 1e-12);
  EXPECT_LE(loop_period(catalog("catenoid").as_form(), c).real().norm(), 1e-12);
}

TEST(Flux, HelicoidHasRealPeriod) {
  WeierstrassData hel = catalog("catenoid");
  hel.theta = HoloFunction::monomial(kI, -1);
  const auto basis = homology_basis(default_annulus());
  const CVec3 p = loop_period(hel.as_form(), basis[0]);
  EXPECT_GT(p.real().norm(), 1.0);
  EXPECT_EQ(code_of([&] {
              integrate_immersion(hel.as_form(), basis, 1.0, Vec3::Zero(), -1.0,
                                  {PathPiece::arc(0.0, 1.0, 0.0, kPi)});
            }),
            ErrorCode::RealPeriodNonzero);
}

TEST(Flux, TwiceTraversedDoubles) {
  const HoloForm f = catalog("catenoid").as_form();
  const PathPiece twice = PathPiece::arc(0.0, 1.0, 0.0, 2.0 * kTwoPi);
  // Im of the contour integral, by the same quadrature as integrate_immersion
  Vec3 im = Vec3::Zero();
  for (int k = 0; k < 4096; ++k) {
    const double s = (k + 0.5) / 4096.0;
    im += (f(twice.z(s)) * twice.dz(s)).imag() / 4096.0;
  }
  EXPECT_LE((im - 2.0 * flux(f, homology_basis(default_annulus())[0])).norm(), 1e-10);
}

TEST(Integrate, Examples) {
  const HoloForm cat = catalog("catenoid").as_form();
  const auto basis = homology_basis(default_annulus());
  const Vec3 v0(0.1, 0.2, 0.3);
  EXPECT_EQ(integrate_immersion(cat, basis, 1.0, v0, 1.0, {}), v0);
  const Vec3 upper = integrate_immersion(cat, basis, 1.0, v0, -1.0, {PathPiece::arc(0.0, 1.0, 0.0, kPi)});
  const Vec3 lower = integrate_immersion(cat, basis, 1.0, v0, -1.0, {PathPiece::arc(0.0, 1.0, 0.0, -kPi)});
  EXPECT_LE((upper - lower).norm(), 1e-10);

  const HoloForm enn = catalog("enneper_annulus").as_form();
  const Vec3 loop = integrate_immersion(enn, basis, 1.0, v0, 1.0, {PathPiece::arc(0.0, 1.0, 0.0, kTwoPi)});
  EXPECT_LE((loop - v0).norm(), 1e-12);

  // homotopic paths through the annulus
  const cplx a(0.7, 0.1), b(-0.2, 1.6);
  const Vec3 p1 = integrate_immersion(cat, basis, a, v0, b, default_path(default_annulus(), a, b));
  const Vec3 p2 = integrate_immersion(
      cat, basis, a, v0, b,
      {PathPiece::line(a, 1.5 * a), PathPiece::arc(0.0, std::abs(1.5 * a), std::arg(a), std::arg(b)),
       PathPiece::line(std::polar(std::abs(1.5 * a), std::arg(b)), b)});
  EXPECT_LE((p1 - p2).norm(), 1e-8);
}

TEST(Conformality, Residuals) {
  const auto grid = verification_grid(default_annulus(), 8, 32);
  auto f = assemble_f(catalog("catenoid"), grid);
  EXPECT_LE(conformality_residual(f), 1e-12);
  auto f2 = f;
  for (auto& v : f2) v *= 2.0;
  EXPECT_EQ(conformality_residual(f2), conformality_residual(f));
  for (auto& v : f) v(0) += 0.1;
  EXPECT_GT(conformality_residual(f), 0.01);
}

TEST(Flatness, Examples) {
  const auto grid = verification_grid(default_annulus(), 16, 64);
  const FlatCheck e = is_flat(catalog("flat_exponential"), grid);
  EXPECT_TRUE(e.flat);
  EXPECT_LE((e.ray - CVec3(0.0, kI, 1.0)).norm(), 1e-12);
  EXPECT_FALSE(is_flat(catalog("catenoid"), grid).flat);
  std::vector<CVec3> q;
  for (cplx z : grid) q.push_back(CVec3(0.0, kI, 1.0) * (z * z + 1.0));
  const FlatCheck r = is_flat(q);
  EXPECT_TRUE(r.flat);
  EXPECT_LE((r.ray - CVec3(0.0, kI, 1.0)).norm(), 1e-12);
  EXPECT_TRUE(is_flat(catalog("vertical_plane"), grid).flat);
}

TEST(Catalog, NamesAndErrors) {
  for (const auto& n : catalog_names()) EXPECT_NO_THROW(catalog(n));
  EXPECT_EQ(code_of([] { catalog("gyroid"); }), ErrorCode::UnknownName);
}

TEST(Immersion, MetricPositivityDetectsZeros) {
  const CircularDomain d = default_annulus();
  const MinimalImmersion m = make_immersion(catalog("catenoid").as_form(), d, 1.0, Vec3::Zero());
  ASSERT_EQ(m.flux.size(), 1u);
  EXPECT_LE((m.flux[0] - Vec3(0.0, 0.0, kTwoPi)).norm(), 1e-10);
  // u(-1) = Re int_1^{-1} f dz / z
  EXPECT_LE((m(-1.0) - Vec3(2.0, 0.0, 0.0)).norm(), 1e-10);
  const cplx z0 = verification_grid(d, 16, 64).front();
  const HoloForm bad = [z0](cplx z) -> CVec3 { return (z - z0) * CVec3(1.0, kI, 0.0); };
  EXPECT_EQ(code_of([&] { make_immersion(bad, d, 1.0, Vec3::Zero()); }), ErrorCode::NotImmersion);
}
