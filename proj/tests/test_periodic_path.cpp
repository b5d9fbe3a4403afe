#include <gtest/gtest.h>

#include "cmi/periodic_path.hpp"

using namespace cmi;

namespace {

CVec3 smooth_loop(double x) {
  const cplx e = std::polar(1.0, kTwoPi * x);
  return CVec3(std::exp(0.3 * e), e * e + 0.5, cplx(std::cos(kTwoPi * x), std::sin(4 * kPi * x)));
}

}  // namespace

TEST(PeriodicPath, RejectsBadSizes) {
  EXPECT_THROW(PeriodicPath(std::vector<CVec3>(32, CVec3::Zero())), Error);
  EXPECT_THROW(PeriodicPath(std::vector<CVec3>(100, CVec3::Zero())), Error);
  EXPECT_NO_THROW(PeriodicPath(std::vector<CVec3>(64, CVec3::Zero())));
}

TEST(PeriodicPath, EvalInterpolatesSamplesAndBetween) {
  auto p = PeriodicPath::from_function(smooth_loop, 64);
  for (int k = 0; k < 64; k += 7) EXPECT_LE((p.eval(p.x(k)) - p[k]).norm(), 1e-13);
  for (double x : {0.013, 0.377, 0.9}) EXPECT_LE((p.eval(x) - smooth_loop(x)).norm(), 1e-12);
}

TEST(PeriodicPath, DerivativeAndAntiderivative) {
  auto p = PeriodicPath::from_function(smooth_loop, 128);
  auto d = p.derivative();
  const double h = 1e-5;
  for (double x : {0.1, 0.55}) {
    const CVec3 fd = (smooth_loop(x + h) - smooth_loop(x - h)) / (2 * h);
    EXPECT_LE((d.eval(x) - fd).norm(), 1e-7);
  }
  auto back = d.antiderivative();
  auto centered = p;
  const CVec3 m = p.mean();
  for (auto& v : centered.samples_mut()) v -= m;
  for (int k = 0; k < 128; ++k) EXPECT_LE((back[k] - centered[k]).norm(), 1e-12);
}

TEST(PeriodicPath, ResampleRoundtrip) {
  auto p = PeriodicPath::from_function(smooth_loop, 64);
  auto up = p.resample(256);
  auto ref = PeriodicPath::from_function(smooth_loop, 256);
  for (int k = 0; k < 256; ++k) EXPECT_LE((up[k] - ref[k]).norm(), 1e-12);
  auto down = up.resample(64);
  for (int k = 0; k < 64; ++k) EXPECT_LE((down[k] - p[k]).norm(), 1e-12);
}

TEST(PeriodicPath, RealPathRealArithmetic) {
  auto r = RealPath::from_function([](double x) { return Vec3(std::cos(kTwoPi * x), std::sin(kTwoPi * x), 1.0); }, 64);
  EXPECT_LE((r.mean() - Vec3(0, 0, 1)).norm(), 1e-15);
  auto d = r.derivative();
  EXPECT_NEAR(d[0](1), kTwoPi, 1e-12);
  EXPECT_LT(r.spectral_tail(), 1e-14);
}
