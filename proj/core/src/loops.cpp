#include "cmi/loops.hpp"

#include <cmath>
#include <random>

#include <Eigen/SVD>

namespace cmi {

Segment::Segment(double a_, double b_) : a(a_), b(b_) {
  if (!(a >= 0.0 && a < 1.0 && b > a && b < a + 1.0))
    throw Error(ErrorCode::InvalidArgument, "segment needs 0 <= a < 1 and a < b < a + 1");
}

double Segment::unwrap(double x) const {
  double u = x - std::floor(x);
  if (u < a) u += 1.0;
  return u;
}

bool Segment::contains(double x) const { return unwrap(x) <= b; }

bool Segment::overlaps(const Segment& o) const {
  return contains(o.a) || contains(o.b) || o.contains(a) || o.contains(b);
}

double smooth_step(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double e0 = std::exp(-1.0 / u);
  const double e1 = std::exp(-1.0 / (1.0 - u));
  return e0 / (e0 + e1);
}

double smooth_step_derivative(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double e0 = std::exp(-1.0 / u);
  const double e1 = std::exp(-1.0 / (1.0 - u));
  const double d0 = e0 / (u * u);
  const double d1 = e1 / ((1.0 - u) * (1.0 - u));
  return (d0 * e1 + e0 * d1) / ((e0 + e1) * (e0 + e1));
}

double plateau(const Segment& s, double r, double x) {
  const double u = s.unwrap(x);
  if (u > s.b) return 0.0;
  return smooth_step((u - s.a) / r) * smooth_step((s.b - u) / r);
}

CVec3 period(const PeriodicPath& sigma) { return sigma.mean(); }

PairResiduals pair_residuals(const ConformalPair& p) {
  PairResiduals r;
  r.min_speed = std::numeric_limits<double>::infinity();
  for (int k = 0; k < p.size(); ++k) {
    const Vec3& d = p.dh[k];
    const Vec3& g = p.g[k];
    const double nd = d.norm(), ng = g.norm();
    r.min_speed = std::min(r.min_speed, nd);
    if (nd == 0.0 || ng == 0.0) {
      r.orthogonality = r.length = std::numeric_limits<double>::infinity();
      continue;
    }
    r.orthogonality = std::max(r.orthogonality, std::abs(g.dot(d)) / (nd * ng));
    r.length = std::max(r.length, std::abs(ng - nd) / nd);
  }
  return r;
}

ConformalPair make_pair(const RealPath& h, const RealPath& g) {
  if (h.size() != g.size()) throw Error(ErrorCode::InvalidPair, "h and g sample counts differ");
  return {h, h.derivative(), g};
}

ConformalPair pair_from_derivative(const RealPath& dh, const RealPath& g, int anchor, const Vec3& value) {
  if (dh.size() != g.size()) throw Error(ErrorCode::InvalidPair, "h' and g sample counts differ");
  RealPath h = dh.antiderivative();
  const Vec3 shift = value - h[anchor];
  for (auto& v : h.samples_mut()) v += shift;
  return {h, dh, g};
}

PeriodicPath pair_to_loop(const ConformalPair& p, double tol_conf) {
  const PairResiduals r = pair_residuals(p);
  if (!(r.orthogonality <= tol_conf && r.length <= tol_conf && r.min_speed > 0.0))
    throw Error(ErrorCode::InvalidPair, "pair residuals " + std::to_string(r.orthogonality) + ", " +
                                            std::to_string(r.length) + " exceed tolerance");
  return complexify(p.dh, p.g);
}

ConformalPair loop_to_pair(const PeriodicPath& sigma, int anchor, const Vec3& value) {
  std::vector<Vec3> re(static_cast<size_t>(sigma.size())), im(re.size());
  for (int k = 0; k < sigma.size(); ++k) {
    re[static_cast<size_t>(k)] = sigma[k].real();
    im[static_cast<size_t>(k)] = sigma[k].imag();
  }
  return pair_from_derivative(RealPath(std::move(re)), RealPath(std::move(im)), anchor, value);
}

double min_speed(const RealPath& h) {
  const RealPath d = h.derivative();
  double m = std::numeric_limits<double>::infinity();
  for (const auto& v : d.samples()) m = std::min(m, v.norm());
  return m;
}

double nonflat_ratio(const RealPath& h, const Segment& on) {
  std::vector<Vec3> pts;
  for (int k = 0; k < h.size(); ++k)
    if (on.contains(h.x(k))) pts.push_back(h[k]);
  if (pts.size() < 4) return 0.0;
  Vec3 c = Vec3::Zero();
  for (const auto& v : pts) c += v;
  c /= static_cast<double>(pts.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = (pts[i] - c).transpose();
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  return sv(0) > 0.0 ? sv(2) / sv(0) : 0.0;
}

bool is_nonflat(const RealPath& h, const Segment& on, double rel_threshold) {
  return nonflat_ratio(h, on) > rel_threshold;
}

bool nondegenerate_on(const PeriodicPath& sigma, const Segment& I, double rel_threshold) {
  std::vector<CVec3> rows;
  for (int k = 0; k < sigma.size(); ++k)
    if (I.contains(sigma.x(k))) rows.push_back(sigma[k]);
  if (rows.empty()) throw Error(ErrorCode::EmptySegment, "segment contains no samples");
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(rows.size()), 3);
  for (size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues();
  return sv(0) > 0.0 && sv(1) > rel_threshold * sv(0);
}

ImmersionFamily1D connect_immersions(const RealPath& h0, const RealPath& h1, std::optional<Segment> fixed,
                                     int n_t, unsigned seed, int max_retries) {
  if (h0.size() != h1.size()) throw Error(ErrorCode::InvalidArgument, "sample counts differ");
  if (n_t < 2) throw Error(ErrorCode::InvalidArgument, "need at least two t-samples");
  const int n = h0.size();
  const RealPath d0 = h0.derivative(), d1 = h1.derivative();
  const double threshold = 1e-3 * std::min(min_speed(h0), min_speed(h1));
  if (!(threshold > 0.0)) throw Error(ErrorCode::NotImmersion, "endpoint is not an immersion");

  // Perturbation directions vanish on the fixed segment.
  std::vector<double> cut(static_cast<size_t>(n), 1.0);
  if (fixed) {
    const Segment grown(std::fmod(fixed->a + 1.0 - 0.02, 1.0),
                        std::fmod(fixed->a + 1.0 - 0.02, 1.0) + fixed->length() + 0.04);
    for (int k = 0; k < n; ++k) cut[static_cast<size_t>(k)] = 1.0 - plateau(grown, 0.02, h0.x(k));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ImmersionFamily1D out;
  RealPath bump(std::vector<Vec3>(static_cast<size_t>(n), Vec3::Zero()));
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const RealPath dbump = bump.derivative();
    out.t.clear();
    out.h.clear();
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_t; ++i) {
      const double t = static_cast<double>(i) / (n_t - 1);
      const double w = t * (1.0 - t);
      std::vector<Vec3> s(static_cast<size_t>(n));
      for (int k = 0; k < n; ++k) {
        s[static_cast<size_t>(k)] = (1.0 - t) * h0[k] + t * h1[k] + w * bump[k];
        worst = std::min(worst, ((1.0 - t) * d0[k] + t * d1[k] + w * dbump[k]).norm());
      }
      if (i == 0) s = h0.samples();
      if (i == n_t - 1) s = h1.samples();
      out.t.push_back(t);
      out.h.emplace_back(std::move(s));
    }
    out.min_speed = worst;
    out.retries = attempt;
    if (worst > threshold) return out;
    // generic low-frequency perturbation, growing with the attempt count
    const double amp = 0.1 * (attempt + 1) * std::max(min_speed(h0), min_speed(h1));
    std::vector<Vec3> s(static_cast<size_t>(n), Vec3::Zero());
    for (int m = 1; m <= 3; ++m) {
      const Vec3 a(nd(rng), nd(rng), nd(rng)), b(nd(rng), nd(rng), nd(rng));
      for (int k = 0; k < n; ++k) {
        const double x = h0.x(k);
        s[static_cast<size_t>(k)] +=
            amp / (kTwoPi * m) * cut[static_cast<size_t>(k)] * (std::cos(kTwoPi * m * x) * a + std::sin(kTwoPi * m * x) * b);
      }
    }
    bump = RealPath(std::move(s));
  }
  throw Error(ErrorCode::PerturbationFailed,
              "connect_immersions: min |h_t'| = " + std::to_string(out.min_speed) + " after retries");
}

}  // namespace cmi
