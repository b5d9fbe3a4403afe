#include <random>

#include <gtest/gtest.h>

#include "cmi/riemann.hpp"
#include "cmi/sprays.hpp"

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

PeriodicPath catenoid_loop(int n = 1024) {
  return restrict_to_curve(catalog("catenoid").as_form(), homology_basis(default_annulus())[0], n);
}

// Catenoid boundary loop taken through a flux-to-zero period isotopy.
const std::vector<std::vector<PeriodicPath>>& catenoid_family() {
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

const Segment kSeg(0.07, 0.98);

Eigen::VectorXcd random_w(std::mt19937_64& rng, int n, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXcd w(n);
  for (int i = 0; i < n; ++i) w(i) = cplx(u(rng), u(rng));
  return w * (radius / w.norm());
}

}  // namespace

TEST(Spray, IdentityAndLocality) {
  const LoopSpray s = build_spray(catenoid_family(), {kSeg});
  ASSERT_EQ(s.dim_w(), 3);
  std::mt19937_64 rng(7);
  for (int t : {0, 7, 15}) {
    const auto same = s.apply(t, Eigen::VectorXcd::Zero(3));
    EXPECT_EQ(same[0].samples(), s.base[static_cast<size_t>(t)][0].samples());
    const auto moved = s.apply(t, random_w(rng, 3, 0.4));
    int outside = 0;
    for (int k = 0; k < moved[0].size(); ++k) {
      const double x = moved[0].x(k);
      bool inside = false;
      for (const auto& c : s.controls) inside = inside || c.bump(x) != 0.0;
      if (!inside) {
        ++outside;
        EXPECT_EQ(moved[0][k], s.base[static_cast<size_t>(t)][0][k]);
      }
      EXPECT_LE(std::abs(null_residual(moved[0][k])), 1e-10 * moved[0][k].squaredNorm());
    }
    EXPECT_GT(outside, 0);
  }
  for (const auto& c : s.controls) {
    const Segment sup = c.support();
    EXPECT_TRUE(kSeg.contains(sup.a) && kSeg.contains(sup.b));
  }
}

TEST(Spray, CatenoidDomination) {
  const auto& fam = catenoid_family();
  const LoopSpray s = build_spray(fam, {kSeg});
  for (int t = 0; t < s.n_t(); ++t) {
    const Eigen::MatrixXcd j = period_jacobian(s, t);
    ASSERT_EQ(j.rows(), 3);
    EXPECT_GT(smallest_singular_value(j), 1e-4);
  }
  // scaling controls: d period / d w_i = mean of h_i sigma
  const Eigen::MatrixXcd j = period_jacobian(s, 5);
  const PeriodicPath& sig = fam[5][0];
  for (int i = 0; i < 3; ++i) {
    CVec3 col = CVec3::Zero();
    for (int k = 0; k < sig.size(); ++k) col += s.controls[static_cast<size_t>(i)].bump(sig.x(k)) * sig[k];
    col /= static_cast<double>(sig.size());
    EXPECT_LE((j.col(i) - col).norm(), 1e-8 * (1.0 + col.norm()));
  }
}

TEST(Spray, JacobianRefinement) {
  const std::vector<std::vector<PeriodicPath>> coarse{{catenoid_loop(1024)}}, fine{{catenoid_loop(2048)}};
  const LoopSpray a = build_spray(coarse, {kSeg});
  LoopSpray b = a;
  b.base = fine;
  const Eigen::MatrixXcd ja = period_jacobian(a, 0), jb = period_jacobian(b, 0);
  EXPECT_LE((ja - jb).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Spray, EmptyAndErrors) {
  EXPECT_EQ(period_jacobian(LoopSpray{}, 0).size(), 0);
  // a constant null loop spans one ray only
  const PeriodicPath flat(std::vector<CVec3>(256, CVec3(1.0, kI, 0.0)));
  EXPECT_EQ(ErrorCode::DegenerateLoop, code_of([&] { build_spray({{flat}}, {kSeg}); }));
  EXPECT_EQ(ErrorCode::ThirdComponentVanishes, code_of([&] { build_spray_fixed_third({{flat}}, {kSeg}); }));
  SprayOptions strict;
  strict.sigma_min_threshold = 1e6;
  EXPECT_EQ(ErrorCode::DominationFailed, code_of([&] { build_spray({{catenoid_loop()}}, {kSeg}, strict); }));
  EXPECT_EQ(ErrorCode::InvalidArgument, code_of([&] { build_spray({{catenoid_loop()}}, {kSeg, kSeg}); }));
}

TEST(SprayFixedThird, KeepsThirdComponent) {
  const auto& fam = catenoid_family();
  const LoopSpray s = build_spray_fixed_third(fam, {kSeg});
  std::mt19937_64 rng(11);
  for (int t = 0; t < s.n_t(); ++t) {
    const auto moved = s.apply(t, random_w(rng, 3, 0.5));
    for (int k = 0; k < moved[0].size(); ++k) {
      EXPECT_EQ(moved[0][k](2), fam[static_cast<size_t>(t)][0][k](2));
      EXPECT_LE(std::abs(null_residual(moved[0][k])), 1e-10 * moved[0][k].squaredNorm());
    }
    const Eigen::MatrixXcd j = period_jacobian(s, t);
    ASSERT_EQ(j.rows(), 2);
    EXPECT_GT(smallest_singular_value(j), 1e-4);
  }
}

TEST(SolveW, TargetsAlreadyMet) {
  const LoopSpray s = build_spray(catenoid_family(), {kSeg});
  PeriodTargets tg;
  for (int t = 0; t < s.n_t(); ++t) tg.push_back(s.periods(t, Eigen::VectorXcd::Zero(3)));
  const SolveResult r = solve_w(s, tg);
  EXPECT_EQ(r.newton_iterations, 0);
  EXPECT_EQ(r.max_w, 0.0);
}

TEST(SolveW, PerturbedTargetsConverge) {
  const LoopSpray s = build_spray(catenoid_family(), {kSeg});
  double smin = std::numeric_limits<double>::infinity();
  for (int t = 0; t < s.n_t(); ++t) smin = std::min(smin, smallest_singular_value(period_jacobian(s, t)));
  const CVec3 dir = CVec3(1.0, cplx(0.0, -2.0), 0.5).normalized();
  const double amp = 0.09 * smin * s.radius_w;
  PeriodTargets tg;
  for (int t = 0; t < s.n_t(); ++t) {
    const double tt = static_cast<double>(t) / (s.n_t() - 1);
    tg.push_back({s.periods(t, Eigen::VectorXcd::Zero(3))[0] + tt * amp * dir});
  }
  const SolveResult r = solve_w(s, tg);
  EXPECT_EQ(r.w[0], Eigen::VectorXcd::Zero(3));
  for (int t = 0; t < s.n_t(); ++t) {
    EXPECT_LE(r.residual[static_cast<size_t>(t)], 1e-9);
    EXPECT_LE((s.periods(t, r.w[static_cast<size_t>(t)])[0] - tg[static_cast<size_t>(t)][0]).norm(), 1e-9);
  }
  EXPECT_LT(r.max_w, s.radius_w);

  LoopSpray tight = s;
  tight.radius_w = 1e-6;
  EXPECT_EQ(ErrorCode::LeftDomain, code_of([&] { solve_w(tight, tg); }));
  SolveOptions none;
  none.max_iterations = 0;
  EXPECT_EQ(ErrorCode::ContinuationStalled, code_of([&] { solve_w(s, tg, none); }));
  PeriodTargets bad = tg;
  bad[0][0] += CVec3(1.0, 0.0, 0.0);
  EXPECT_EQ(ErrorCode::InvalidArgument, code_of([&] { solve_w(s, bad); }));
}
