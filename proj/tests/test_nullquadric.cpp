#include <random>

#include <gtest/gtest.h>

#include "cmi/nullquadric.hpp"

using namespace cmi;

namespace {

void expect_near(const CVec3& a, const CVec3& b, double tol) {
  EXPECT_LE((a - b).norm(), tol) << "a = " << a.transpose() << " b = " << b.transpose();
}

PeriodicPath loop_from(const std::function<CVec3(double)>& f, int n) {
  return PeriodicPath::from_function(f, n);
}

}  // namespace

TEST(NullResidual, Examples) {
  EXPECT_EQ(null_residual(CVec3(1, kI, 0)), 0.0);
  EXPECT_EQ(null_residual(CVec3(1, 0, 0)), 1.0);
  EXPECT_EQ(null_residual(CVec3(0, 2.0 * kI, 2)), 0.0);
}

TEST(SpinorToNull, Examples) {
  expect_near(spinor_to_null({1.0, 0.0}), CVec3(1, kI, 0), 0.0);
  expect_near(spinor_to_null({1.0, 1.0}), CVec3(0, 2.0 * kI, 2), 0.0);
  expect_near(spinor_to_null({0.0, 1.0}), CVec3(-1, kI, 0), 0.0);
}

TEST(NullToSpinor, BranchRule) {
  auto s = null_to_spinor(CVec3(1, kI, 0));
  EXPECT_EQ(s.a, cplx(1.0));
  EXPECT_EQ(s.b, cplx(0.0));
  s = null_to_spinor(CVec3(0, 2.0 * kI, 2));
  EXPECT_NEAR(std::abs(s.a - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.b - 1.0), 0.0, 1e-15);
}

TEST(NullToSpinor, Errors) {
  try {
    null_to_spinor(CVec3(1, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotOnQuadric);
  }
  try {
    null_to_spinor(CVec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroPoint);
  }
}

TEST(NullToSpinor, RandomRoundtripUpToSign) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    SpinorPair s{cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng))};
    const CVec3 z = spinor_to_null(s);
    EXPECT_LE(null_residual(z), 1e-14 * (1.0 + std::pow(std::abs(s.a) + std::abs(s.b), 4)));
    const SpinorPair r = null_to_spinor(z);
    const double plus = std::abs(r.a - s.a) + std::abs(r.b - s.b);
    const double minus = std::abs(r.a + s.a) + std::abs(r.b + s.b);
    EXPECT_LE(std::min(plus, minus), 1e-12 * (1.0 + std::abs(s.a) + std::abs(s.b)));
    EXPECT_GE(r.a.real(), 0.0);
  }
}

TEST(FiberPoint, FrameAndPeriodicity) {
  const Vec3 e1 = Vec3::UnitX();
  const CVec3 z = fiber_point(e1, 0.0);
  EXPECT_NEAR(z.imag().dot(e1), 0.0, 1e-15);
  EXPECT_NEAR(z.imag().norm(), 1.0, 1e-15);
  EXPECT_LE(null_residual(z), 1e-15);
  expect_near(fiber_point(e1, 0.7), fiber_point(e1, 0.7 + kTwoPi), 1e-14);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 50; ++i) {
    const Vec3 xi(nd(rng), nd(rng), nd(rng));
    const double phi = 6.0 * nd(rng);
    const CVec3 p = fiber_point(xi, phi);
    EXPECT_LE((p.real() - xi).norm(), 1e-15 * xi.norm());
    const RealFiberPoint f = split(p);
    EXPECT_NEAR(f.xi.dot(f.eta), 0.0, 1e-12 * xi.squaredNorm());
    EXPECT_NEAR(f.eta.norm(), xi.norm(), 1e-12 * xi.norm());
  }
}

TEST(FiberPoint, ZeroBase) {
  try {
    fiber_point(Vec3::Zero(), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroBase);
  }
}

TEST(Flow, Examples) {
  expect_near(flow(CVec3(1, kI, 0), TangentFlow::scaling, std::log(2.0)), CVec3(2, 2.0 * kI, 0), 1e-15);
  const CVec3 z(0.3, kI * 0.2, cplx(0.1, 0.4));
  expect_near(flow(z, TangentFlow::rotation_12, 0.0), z, 0.0);
}

TEST(Flow, GroupLawsOnRandomSamples) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 50; ++i) {
    const cplx t(nd(rng), nd(rng));
    const cplx s(nd(rng), nd(rng));
    const CVec3 base = spinor_to_null({cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng))});
    EXPECT_LE(null_residual(flow(CVec3(1, kI, 0), TangentFlow::rotation_12, t)), 1e-10);
    for (TangentFlow f : kAllFlows) {
      const CVec3 a = flow(base, f, t);
      const double scale = std::max(1.0, a.squaredNorm());
      EXPECT_LE(null_residual(a), 1e-12 * scale) << to_string(f);
      const CVec3 lhs = flow(flow(base, f, s), f, t);
      const CVec3 rhs = flow(base, f, s + t);
      EXPECT_LE((lhs - rhs).norm(), 1e-10 * std::max(1.0, rhs.norm())) << to_string(f);
    }
  }
}

TEST(Flow, FieldIsDerivativeOfFlow) {
  const CVec3 z = spinor_to_null({cplx(0.4, 0.2), cplx(-0.3, 0.9)});
  const double h = 1e-6;
  for (TangentFlow f : kAllFlows) {
    const CVec3 fd = (flow(z, f, h) - flow(z, f, -h)) / (2 * h);
    EXPECT_LE((fd - flow_field(z, f)).norm(), 1e-9);
  }
}

TEST(Pi1Class, ConstantLoop) {
  auto loop = loop_from([](double) { return CVec3(1, kI, 0); }, 64);
  EXPECT_EQ(pi1_class(loop), 0);
}

TEST(Pi1Class, HalfTurnSpinorIsOdd) {
  auto f = [](double x) { return spinor_to_null({std::polar(1.0, kPi * x), 0.0}); };
  auto loop = loop_from(f, 64);
  EXPECT_EQ(pi1_class(loop), 1);
  const SpinorLift lift = lift_loop(loop.samples());
  EXPECT_NEAR(std::abs(lift.lift.back().a + lift.lift.front().a), 0.0, 1e-12);
}

TEST(Pi1Class, DoubledLoopIsEven) {
  auto f = [](double x) { return spinor_to_null({std::polar(1.0, kPi * x), 0.0}); };
  auto doubled = loop_from([&](double x) { return f(std::fmod(2.0 * x, 1.0)); }, 128);
  EXPECT_EQ(pi1_class(doubled), 0);
}

TEST(Pi1Class, Undersampled) {
  // spinor turns by 3 pi over 64 samples in a single step region
  auto f = [](double x) { return spinor_to_null({std::polar(1.0, 3.0 * kPi * std::pow(x, 40.0)), 0.0}); };
  try {
    pi1_class(loop_from(f, 64));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UndersampledLoop);
  }
}
