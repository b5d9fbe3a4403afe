#include "cmi/labyrinth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <sstream>

#include <boost/numeric/interval.hpp>

#include "cmi/nullquadric.hpp"

namespace cmi {

namespace {

using Interval = boost::numeric::interval<double>;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

}  // namespace

// ---------------------------------------------------------------- ends

cplx EndChart::to_chart(cplx z) const { return hole < 0 ? (z - center) / scale : scale / (z - center); }

cplx EndChart::from_chart(cplx w) const { return hole < 0 ? center + scale * w : center + scale / w; }

cplx EndChart::dz_dchart(cplx w) const { return hole < 0 ? cplx(scale) : -scale / (w * w); }

bool EndChart::in_end(cplx z) const {
  const double r = std::abs(to_chart(z));
  return r >= r_core && r <= r_end * (1.0 + 1e-12);
}

std::vector<EndChart> end_charts(const CircularDomain& d, double core_fraction) {
  if (!(core_fraction > 0.0 && core_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "core fraction must lie in (0, 1)");
  const double R = d.outer.radius;
  const std::vector<CurveChart> gens = homology_basis(d);
  std::vector<EndChart> ends;

  double r_in = d.holes.empty() ? 0.5 * R : 0.0;
  for (const auto& g : gens) r_in = std::max(r_in, std::abs(g.center - d.outer.center) + g.radius);
  ends.push_back({-1, d.outer.center, 1.0, std::pow(r_in, 1.0 - core_fraction) * std::pow(R, core_fraction), R});

  for (size_t j = 0; j < d.holes.size(); ++j) {
    const Disk& h = d.holes[j];
    const double scale = h.radius * R;
    const double r_gen = scale / gens[j].radius;
    ends.push_back({static_cast<int>(j), h.center, scale,
                    std::pow(r_gen, 1.0 - core_fraction) * std::pow(R, core_fraction), R});
  }

  // hole ends are disks |z - c_j| <= scale / r_core in the plane
  for (size_t a = 1; a < ends.size(); ++a) {
    const double ext_a = ends[a].scale / ends[a].r_core;
    if (std::abs(ends[a].center - d.outer.center) + ext_a >= ends[0].r_core)
      throw Error(ErrorCode::InvalidArgument, "end of hole " + std::to_string(a - 1) + " meets the outer end");
    for (size_t b = 1; b < a; ++b)
      if (std::abs(ends[a].center - ends[b].center) <= ext_a + ends[b].scale / ends[b].r_core)
        throw Error(ErrorCode::InvalidArgument,
                    "ends of holes " + std::to_string(b - 1) + " and " + std::to_string(a - 1) + " meet");
  }
  return ends;
}

bool in_core(const std::vector<EndChart>& ends, cplx z) {
  for (const auto& e : ends)
    if (std::abs(e.to_chart(z)) > e.r_core) return false;
  return true;
}

// ---------------------------------------------------------------- bands

int BandSet::bracket_of(double t) const {
  if (brackets.empty() || t < brackets.front()) return -1;
  for (size_t k = 0; k + 1 < brackets.size(); ++k)
    if (t <= brackets[k + 1]) return static_cast<int>(k);
  return static_cast<int>(brackets.size()) - 2;
}

namespace {

std::vector<size_t> samples_in(const std::vector<double>& t, double a, double b) {
  std::vector<size_t> out;
  for (size_t k = 0; k < t.size(); ++k)
    if (t[k] >= a - 1e-12 && t[k] <= b + 1e-12) out.push_back(k);
  if (out.empty()) {
    size_t best = 0;
    for (size_t k = 1; k < t.size(); ++k)
      if (std::abs(t[k] - 0.5 * (a + b)) < std::abs(t[best] - 0.5 * (a + b))) best = k;
    out.push_back(best);
  }
  return out;
}

// Widest run of certified radii outside the used intervals, or nothing.
bool search_band(const EndChart& e, const std::vector<size_t>& ts, const ThirdFamily& f3,
                 const std::vector<std::pair<double, double>>& used, const BandOptions& opt, AnnulusBand& out) {
  const int nr = opt.n_r, nt = opt.n_theta;
  std::vector<double> rho(static_cast<size_t>(nr));
  for (int i = 0; i < nr; ++i) rho[static_cast<size_t>(i)] = e.r_core + (e.r_end - e.r_core) * (0.02 + 0.96 * i / (nr - 1));
  std::vector<double> vmin(static_cast<size_t>(nr), std::numeric_limits<double>::infinity());
  std::vector<double> var(static_cast<size_t>(nr), 0.0);
  std::vector<double> prev(static_cast<size_t>(nt)), cur(static_cast<size_t>(nt));
  for (size_t k : ts) {
    for (int i = 0; i < nr; ++i) {
      for (int a = 0; a < nt; ++a) {
        const cplx w = std::polar(rho[static_cast<size_t>(i)], kTwoPi * a / nt);
        cur[static_cast<size_t>(a)] = std::abs(f3(k, e.from_chart(w)) * e.dz_dchart(w));
      }
      double& m = vmin[static_cast<size_t>(i)];
      double& v = var[static_cast<size_t>(i)];
      for (int a = 0; a < nt; ++a) {
        m = std::min(m, cur[static_cast<size_t>(a)]);
        v = std::max(v, std::abs(cur[static_cast<size_t>(a)] - cur[static_cast<size_t>((a + 1) % nt)]));
        if (i > 0) {
          const double dv = std::abs(cur[static_cast<size_t>(a)] - prev[static_cast<size_t>(a)]);
          v = std::max(v, dv);
          var[static_cast<size_t>(i - 1)] = std::max(var[static_cast<size_t>(i - 1)], dv);
        }
      }
      std::swap(prev, cur);
    }
  }
  const double gap = (e.r_end - e.r_core) / nr;
  auto free = [&](double r) {
    for (const auto& u : used)
      if (r >= u.first - gap && r <= u.second + gap) return false;
    return true;
  };
  int best_len = 0, best_start = -1, run = 0;
  for (int i = 0; i < nr; ++i) {
    const size_t s = static_cast<size_t>(i);
    const bool good = vmin[s] > 0.0 && vmin[s] >= opt.margin * var[s] && free(rho[s]);
    run = good ? run + 1 : 0;
    if (run > best_len) {
      best_len = run;
      best_start = i - run + 1;
    }
  }
  if (best_len < 2) return false;
  out.r = rho[static_cast<size_t>(best_start)];
  out.R = rho[static_cast<size_t>(best_start + best_len - 1)];
  return true;
}

}  // namespace

BandSet find_bands(const std::vector<double>& t, const ThirdFamily& f3, const std::vector<EndChart>& ends,
                   const BandOptions& opt) {
  if (t.empty() || ends.empty()) throw Error(ErrorCode::InvalidArgument, "need t-samples and ends");
  if (!(opt.t0 > 0.0 && opt.t0 < 1.0)) throw Error(ErrorCode::InvalidArgument, "bracket start must lie in (0, 1)");
  if (opt.n_r < 4 || opt.n_theta < 8) throw Error(ErrorCode::InvalidArgument, "probe grid too coarse");

  struct Pending {
    double a, b;
    int depth;
  };
  std::vector<Pending> todo{{opt.t0, 1.0, 0}};
  std::vector<std::vector<std::pair<double, double>>> used(ends.size());
  BandSet out;
  out.brackets.push_back(opt.t0);
  while (!todo.empty()) {
    const Pending p = todo.front();
    todo.erase(todo.begin());
    const std::vector<size_t> ts = samples_in(t, p.a, p.b);
    std::vector<AnnulusBand> found;
    int failed = -1;
    for (size_t e = 0; e < ends.size(); ++e) {
      AnnulusBand b;
      b.end = static_cast<int>(e);
      if (!search_band(ends[e], ts, f3, used[e], opt, b)) {
        failed = static_cast<int>(e);
        break;
      }
      found.push_back(b);
    }
    if (failed >= 0) {
      if (p.depth >= opt.max_splits) {
        std::ostringstream msg;
        msg << "no band free of zeros of f3 on end " << failed << " for t in [" << p.a << ", " << p.b << "]";
        throw Error(ErrorCode::NoBandFound, msg.str());
      }
      const double mid = 0.5 * (p.a + p.b);
      todo.insert(todo.begin(), {{p.a, mid, p.depth + 1}, {mid, p.b, p.depth + 1}});
      continue;
    }
    const int k = static_cast<int>(out.brackets.size()) - 1;
    for (auto& b : found) {
      b.k = k;
      used[static_cast<size_t>(b.end)].push_back({b.r, b.R});
      out.bands.push_back(b);
    }
    out.brackets.push_back(p.b);
  }
  return out;
}

// ---------------------------------------------------------------- labyrinth

bool LabyrinthSet::contains(cplx w) const {
  const double r = std::abs(w);
  if (r < r_in || r > r_out) return false;
  const double phi = wrap_angle(std::arg(w) - opening);
  return phi >= half_gap && phi <= kTwoPi - half_gap;
}

double Labyrinth::s(int n) const { return band.R - n / std::pow(static_cast<double>(N), 3); }

bool Labyrinth::contains(cplx w) const {
  if (sets.empty()) return false;
  const double r = std::abs(w);
  if (r > band.R || r < band.r) return false;
  const int guess = static_cast<int>(std::floor((band.R - r) * std::pow(static_cast<double>(N), 3))) + 1;
  for (int n = std::max(1, guess - 1); n <= std::min(static_cast<int>(sets.size()), guess + 1); ++n)
    if (sets[static_cast<size_t>(n - 1)].contains(w)) return true;
  return false;
}

namespace {

Interval set_inner(const Labyrinth& l, int n) {
  const Interval n3 = boost::numeric::pow(Interval(static_cast<double>(l.N)), 3);
  return Interval(l.band.R) - Interval(static_cast<double>(n)) / n3 + Interval(1.0) / (4.0 * n3);
}

Interval set_outer(const Labyrinth& l, int n) {
  const Interval n3 = boost::numeric::pow(Interval(static_cast<double>(l.N)), 3);
  return Interval(l.band.R) - Interval(static_cast<double>(n - 1)) / n3 - Interval(1.0) / (4.0 * n3);
}

}  // namespace

std::pair<double, double> Labyrinth::clearance(int n) const {
  const Interval g = set_inner(*this, n) - set_outer(*this, n + 1);
  return {g.lower(), g.upper()};
}

bool Labyrinth::certify() const {
  const int m = static_cast<int>(sets.size());
  if (m != 2 * N * N) return false;
  for (int n = 1; n <= m; ++n) {
    if (!(set_inner(*this, n).upper() < set_outer(*this, n).lower())) return false;
    // consecutive sets are radially separated; the radii decrease with n, so this covers all pairs
    if (n < m && !(set_outer(*this, n + 1).upper() < set_inner(*this, n).lower())) return false;
  }
  return band.r < set_inner(*this, m).lower() && set_outer(*this, 1).upper() < band.R;
}

Labyrinth build_labyrinth(const AnnulusBand& band, int N) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "labyrinth resolution must be positive");
  if (!(2.0 / N < band.R - band.r)) {
    std::ostringstream msg;
    msg << "band width " << band.R - band.r << " does not exceed 2/N = " << 2.0 / N;
    throw Error(ErrorCode::BandTooThin, msg.str());
  }
  Labyrinth l;
  l.band = band;
  l.N = N;
  const double n3 = std::pow(static_cast<double>(N), 3);
  for (int n = 1; n <= 2 * N * N; ++n) {
    LabyrinthSet s;
    s.n = n;
    s.r_in = l.s(n) + 0.25 / n3;
    s.r_out = l.s(n - 1) - 0.25 / n3;
    s.half_gap = 1.0 / (static_cast<double>(N) * N);
    s.opening = n % 2 == 0 ? 0.0 : kPi;
    l.sets.push_back(s);
  }
  return l;
}

// ---------------------------------------------------------------- parameters

LopezRosParams choose_params(double f3_min, double c0, double t0, int N, double margin) {
  if (!(t0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "bracket start must be positive");
  if (!(f3_min > 0.0)) throw Error(ErrorCode::InvalidArgument, "f3 must stay away from zero on the bands");
  if (!(c0 > 0.0) || !std::isfinite(c0))
    throw Error(ErrorCode::GaussMapTooSmall, "no positive lower bound for the Gauss map on the bands");
  LopezRosParams p;
  p.epsilon = 0.5 * f3_min;
  p.c0 = c0;
  p.t0 = t0;
  p.N = N;
  const double need = 2.0 * std::pow(static_cast<double>(N), 4) * (1.0 + margin);
  p.lambda = std::max(0.0, (need / c0 - 1.0) / t0);
  return p;
}

bool lambda_holds(const LopezRosParams& p, double g_abs, double t) {
  return (1.0 + p.lambda * t) * g_abs >= 2.0 * std::pow(static_cast<double>(p.N), 4);
}

CVec3 lopez_ros_point(const CVec3& f, cplx mu) {
  const cplx m = (f(0) - kI * f(1)) / mu;
  const cplx p = (f(0) + kI * f(1)) * mu;
  CVec3 out = f;
  out(0) = 0.5 * (m + p);
  out(1) = 0.5 * kI * (m - p);
  return out;
}

int LopezRosFamily::labyrinth_of(cplx z) const {
  for (size_t i = 0; i < labyrinths.size(); ++i) {
    const EndChart& e = ends[static_cast<size_t>(labyrinths[i].band.end)];
    if (labyrinths[i].contains(e.to_chart(z))) return static_cast<int>(i);
  }
  return -1;
}

CVec3 LopezRosFamily::operator()(size_t k, cplx z) const {
  const CVec3 v = f[k](z);
  if (t[k] == 0.0 || labyrinth_of(z) < 0) return v;
  return lopez_ros_point(v, 1.0 + params.lambda * t[k]);
}

double LopezRosFamily::density(size_t k, cplx z) const { return 0.5 * (*this)(k, z).squaredNorm(); }

LopezRosFamily lopez_ros(const std::vector<double>& t, const std::vector<HoloForm>& f,
                         const std::vector<EndChart>& ends, const std::vector<Labyrinth>& labyrinths,
                         const LopezRosParams& params) {
  if (t.size() != f.size()) throw Error(ErrorCode::InvalidArgument, "one form per t-sample");
  return {t, f, ends, labyrinths, params};
}

// ---------------------------------------------------------------- distance

namespace {

struct Grid {
  cplx center;
  double r_lo, dr, dth;
  int n_r, n_t;

  cplx z(int i, int j) const { return center + std::polar(r_lo + dr * i, dth * j); }
  int id(int i, int j) const { return i * n_t + ((j % n_t) + n_t) % n_t; }
};

double graph_distance(const std::vector<double>& sq, const std::vector<char>& active, const std::vector<char>& target,
                      const Grid& g, int src, double src_cost) {
  const size_t n = sq.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  dist[static_cast<size_t>(src)] = src_cost;
  q.push({src_cost, src});
  static const int di[8] = {0, 0, 1, -1, 1, 1, -1, -1};
  static const int dj[8] = {1, -1, 0, 0, 1, -1, 1, -1};
  while (!q.empty()) {
    const auto [d, u] = q.top();
    q.pop();
    if (d > dist[static_cast<size_t>(u)]) continue;
    if (target[static_cast<size_t>(u)]) return d;
    const int i = u / g.n_t, j = u % g.n_t;
    const cplx zu = g.z(i, j);
    for (int e = 0; e < 8; ++e) {
      const int ii = i + di[e];
      if (ii < 0 || ii >= g.n_r) continue;
      const int v = g.id(ii, j + dj[e]);
      if (!active[static_cast<size_t>(v)]) continue;
      const double w = 0.5 * (sq[static_cast<size_t>(u)] + sq[static_cast<size_t>(v)]) * std::abs(g.z(ii, j + dj[e]) - zu);
      if (d + w < dist[static_cast<size_t>(v)]) {
        dist[static_cast<size_t>(v)] = d + w;
        q.push({d + w, v});
      }
    }
  }
  throw Error(ErrorCode::DisconnectedGraph, "no boundary node reachable from the source");
}

struct GraphSetup {
  Grid g;
  std::vector<char> active, target;
  int src = 0;
};

GraphSetup setup_graph(const CircularDomain& d, cplx x0, int n_r, int n_theta, const std::vector<int>& targets) {
  if (n_r < 3 || n_theta < 8) throw Error(ErrorCode::InvalidArgument, "distance grid too coarse");
  GraphSetup s;
  const bool concentric = d.holes.size() == 1 && d.holes[0].center == d.outer.center;
  const double r_lo = concentric ? d.holes[0].radius : 0.0;
  s.g = {d.outer.center, r_lo, (d.outer.radius - r_lo) / (n_r - 1), kTwoPi / n_theta, n_r, n_theta};
  const size_t n = static_cast<size_t>(n_r) * static_cast<size_t>(n_theta);
  s.active.assign(n, 0);
  s.target.assign(n, 0);
  auto wanted = [&](int c) { return targets.empty() || std::find(targets.begin(), targets.end(), c) != targets.end(); };
  auto hole_of = [&](cplx z) {
    for (size_t h = 0; h < d.holes.size(); ++h)
      if (std::abs(z - d.holes[h].center) < d.holes[h].radius * (1.0 - 1e-12)) return static_cast<int>(h);
    return -1;
  };
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_theta; ++j) s.active[static_cast<size_t>(s.g.id(i, j))] = hole_of(s.g.z(i, j)) < 0;
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_theta; ++j) {
      const size_t u = static_cast<size_t>(s.g.id(i, j));
      if (!s.active[u]) continue;
      if (i == n_r - 1 && wanted(-1)) s.target[u] = 1;
      if (concentric && i == 0 && wanted(0)) s.target[u] = 1;
      for (int e = -1; e <= 1; ++e)
        for (int f = -1; f <= 1; ++f) {
          const int ii = i + e;
          if (ii < 0 || ii >= n_r) continue;
          const int h = hole_of(s.g.z(ii, j + f));
          if (h >= 0 && wanted(h)) s.target[u] = 1;
        }
    }
  const double r0 = std::abs(x0 - d.outer.center);
  int i0 = static_cast<int>(std::lround((r0 - r_lo) / s.g.dr));
  i0 = std::clamp(i0, 0, n_r - 1);
  const int j0 = static_cast<int>(std::lround(wrap_angle(std::arg(x0 - d.outer.center)) / s.g.dth)) % n_theta;
  s.src = s.g.id(i0, j0);
  if (!s.active[static_cast<size_t>(s.src)]) throw Error(ErrorCode::InvalidArgument, "source lies outside the domain");
  return s;
}

double run_distance(const std::function<double(cplx)>& density, const CircularDomain& d, cplx x0, int n_r,
                    int n_theta, const std::vector<int>& targets) {
  const GraphSetup s = setup_graph(d, x0, n_r, n_theta, targets);
  std::vector<double> sq(s.active.size(), 0.0);
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_theta; ++j) {
      const size_t u = static_cast<size_t>(s.g.id(i, j));
      if (!s.active[u]) continue;
      const double rho = density(s.g.z(i, j));
      if (!(rho >= 0.0) || !std::isfinite(rho))
        throw Error(ErrorCode::InvalidArgument, "metric density is not a finite nonnegative number");
      sq[u] = std::sqrt(rho);
    }
  const cplx zs = s.g.z(s.src / n_theta, s.src % n_theta);
  const double cost = 0.5 * (std::sqrt(density(x0)) + sq[static_cast<size_t>(s.src)]) * std::abs(zs - x0);
  return graph_distance(sq, s.active, s.target, s.g, s.src, cost);
}

}  // namespace

DistanceResult intrinsic_distance(const std::function<double(cplx)>& density, const CircularDomain& d, cplx x0,
                                  const DistanceOptions& opt) {
  if (!d.contains(x0) && d.clearance(x0) < -1e-12) throw Error(ErrorCode::InvalidArgument, "source outside the domain");
  DistanceResult r;
  r.n_r = opt.n_r;
  r.n_theta = opt.n_theta;
  r.distance = run_distance(density, d, x0, r.n_r, r.n_theta, opt.targets);
  for (int k = 0; k < opt.refinements; ++k) {
    const int nr = 2 * r.n_r - 1, nt = 2 * r.n_theta;
    const double v = run_distance(density, d, x0, nr, nt, opt.targets);
    r.change = std::abs(v - r.distance) / std::max(v, 1e-300);
    r.distance = v;
    r.n_r = nr;
    r.n_theta = nt;
    if (r.change <= opt.refine_tol) break;
  }
  // flat calibration against the Euclidean distance to the targeted boundary
  double exact = std::numeric_limits<double>::infinity();
  auto wanted = [&](int c) {
    return opt.targets.empty() || std::find(opt.targets.begin(), opt.targets.end(), c) != opt.targets.end();
  };
  if (wanted(-1)) exact = std::min(exact, d.outer.radius - std::abs(x0 - d.outer.center));
  for (size_t h = 0; h < d.holes.size(); ++h)
    if (wanted(static_cast<int>(h))) exact = std::min(exact, std::abs(x0 - d.holes[h].center) - d.holes[h].radius);
  if (exact > 0.0 && std::isfinite(exact)) {
    const double flat = run_distance([](cplx) { return 1.0; }, d, x0, r.n_r, r.n_theta, opt.targets);
    r.calibration = flat / exact;
  }
  return r;
}

// ---------------------------------------------------------------- completion

CVec3 LopezRosMap::operator()(cplx z) const {
  const CVec3 f = base(z);
  if (psi.blocks().empty()) return f;
  return lopez_ros_point(f, std::exp(psi(z)));
}

HoloForm LopezRosMap::as_form() const {
  const LopezRosMap copy = *this;
  return [copy](cplx z) { return copy(z); };
}

namespace {

struct Basis {
  std::vector<LaurentBlock> shape;  // coefficient layout of log mu

  int size() const {
    int n = 0;
    for (const auto& b : shape) n += static_cast<int>(b.coeffs.size());
    return n;
  }
  Eigen::RowVectorXcd row(cplx z) const {
    Eigen::RowVectorXcd out(size());
    int c = 0;
    for (const auto& b : shape) {
      const cplx w = (z - b.center) / b.scale;
      for (size_t i = 0; i < b.coeffs.size(); ++i) out(c++) = std::pow(w, b.min_exp + static_cast<int>(i));
    }
    return out;
  }
  HoloFunction make(const Eigen::VectorXcd& x) const {
    std::vector<LaurentBlock> blocks = shape;
    int c = 0;
    for (auto& b : blocks)
      for (auto& v : b.coeffs) v = x(c++);
    return HoloFunction(std::move(blocks));
  }
};

Basis log_factor_basis(const CircularDomain& d, int degree) {
  Basis b;
  b.shape.push_back({d.outer.center, d.outer.radius, 0, std::vector<cplx>(static_cast<size_t>(degree) + 1)});
  for (const auto& h : d.holes) b.shape.push_back({h.center, h.radius, -degree, std::vector<cplx>(static_cast<size_t>(degree))});
  return b;
}

// Samples on a generator circle with the loop values of F1 -+ i F2.
struct GeneratorSamples {
  std::vector<cplx> z, m, p;
};

GeneratorSamples generator_samples(const SpinorMap& u, const CurveChart& c, int n) {
  GeneratorSamples s;
  for (int k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) / n;
    const cplx z = c.z(x), dz = c.dz(x);
    const CVec3 f = u(z);
    s.z.push_back(z);
    s.m.push_back((f(0) - kI * f(1)) * dz);
    s.p.push_back((f(0) + kI * f(1)) * dz);
  }
  return s;
}

}  // namespace

CompletionResult complete_step(const ImmersionFamily& u, double delta, const CompletionOptions& opt) {
  if (u.maps.empty() || u.maps.size() != u.t.size()) throw Error(ErrorCode::InvalidArgument, "need one map per t-sample");
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  if (opt.degree < 1) throw Error(ErrorCode::InvalidArgument, "factor degree must be positive");
  const CircularDomain& d = u.maps.front().domain;
  const cplx x0 = u.basepoint;
  const size_t nt = u.t.size();

  CompletionResult res;
  res.t = u.t;
  CompletionReport& rep = res.report;
  rep.delta = delta;
  res.ends = end_charts(d, opt.core_fraction);
  if (!in_core(res.ends, x0)) throw Error(ErrorCode::InvalidArgument, "basepoint must lie in the core");

  std::vector<HoloForm> forms;
  for (const auto& m : u.maps) forms.push_back(m.as_form());
  rep.tau = intrinsic_distance([&](cplx z) { return metric_density(forms[0], z); }, d, x0, opt.distance).distance;

  // bands, minima of |f3 theta / dz_j| and |g| over the bands
  const ThirdFamily f3 = [&](size_t k, cplx z) { return u.maps[k](z)(2); };
  res.bands = find_bands(u.t, f3, res.ends, opt.bands);
  const auto band_points = [&](const AnnulusBand& b, int n_r, int n_t, const std::function<void(cplx, cplx)>& visit) {
    const EndChart& e = res.ends[static_cast<size_t>(b.end)];
    for (int i = 0; i < n_r; ++i) {
      const double r = b.r + (b.R - b.r) * i / (n_r - 1);
      for (int a = 0; a < n_t; ++a) {
        const cplx w = std::polar(r, kTwoPi * a / n_t);
        visit(w, e.from_chart(w));
      }
    }
  };
  auto band_t = [&](const AnnulusBand& b) {
    return samples_in(u.t, res.bands.brackets[static_cast<size_t>(b.k)], res.bands.brackets[static_cast<size_t>(b.k) + 1]);
  };
  double f3_min = std::numeric_limits<double>::infinity(), c0 = std::numeric_limits<double>::infinity();
  for (const auto& b : res.bands.bands) {
    const EndChart& e = res.ends[static_cast<size_t>(b.end)];
    for (size_t k : band_t(b))
      band_points(b, opt.bands.n_r, opt.bands.n_theta, [&](cplx w, cplx z) {
        const CVec3 f = u.maps[k](z);
        f3_min = std::min(f3_min, std::abs(f(2) * e.dz_dchart(w)));
        c0 = std::min(c0, std::abs(gauss_map(f)));
      });
  }
  const double required = std::max(rep.tau - delta, 1.0 / delta);
  int N = opt.N;
  if (N <= 0) {
    for (const auto& b : res.bands.bands) {
      const double per = std::min(0.5, b.r) * 0.5 * f3_min;
      N = std::max(N, static_cast<int>(std::floor(required * (1.0 + opt.n_margin) / per)) + 1);
    }
  }
  for (const auto& b : res.bands.bands) res.labyrinths.push_back(build_labyrinth(b, N));
  res.params = choose_params(f3_min, c0, res.bands.brackets.front(), N, opt.lambda_margin);
  const LopezRosParams& par = res.params;
  const LopezRosFamily h = lopez_ros(u.t, forms, res.ends, res.labyrinths, par);

  // pointwise estimates on the transformed data
  {
    const double n8e2 = std::pow(static_cast<double>(N), 8) * par.epsilon * par.epsilon;
    const double e2 = par.epsilon * par.epsilon;
    rep.est1_ratio = rep.est2_ratio = std::numeric_limits<double>::infinity();
    bool lambda_ok = true;
    for (size_t li = 0; li < res.labyrinths.size(); ++li) {
      const Labyrinth& lab = res.labyrinths[li];
      const EndChart& e = res.ends[static_cast<size_t>(lab.band.end)];
      std::vector<size_t> ts = band_t(lab.band);
      if (static_cast<int>(ts.size()) > opt.est_t_samples) {
        std::vector<size_t> pick;
        for (int q = 0; q < opt.est_t_samples; ++q)
          pick.push_back(ts[static_cast<size_t>(std::lround(q * (ts.size() - 1.0) / std::max(1, opt.est_t_samples - 1)))]);
        ts = pick;
      }
      std::vector<double> radii;
      for (const auto& s : lab.sets) {
        radii.insert(radii.end(), {s.r_in, 0.5 * (s.r_in + s.r_out), s.r_out});
        radii.push_back(s.r_in - 0.25 / std::pow(static_cast<double>(N), 3));  // gap midpoint
      }
      for (size_t k : ts)
        for (double r : radii)
          for (int a = 0; a < opt.bands.n_theta; ++a) {
            const cplx w = std::polar(r, kTwoPi * a / opt.bands.n_theta);
            const cplx z = e.from_chart(w);
            const CVec3 f = forms[k](z);
            const bool on_l = lab.contains(w);
            const CVec3 hv = on_l ? lopez_ros_point(f, 1.0 + par.lambda * u.t[k]) : f;
            const double dens = 0.5 * hv.squaredNorm() * std::norm(e.dz_dchart(w));
            rep.est2_ratio = std::min(rep.est2_ratio, dens / e2);
            if (on_l) {
              rep.est1_ratio = std::min(rep.est1_ratio, dens / n8e2);
              lambda_ok = lambda_ok && lambda_holds(par, std::abs(gauss_map(f)), u.t[k]);
            }
          }
    }
    // est3: random crossing paths at the first bracket sample
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi);
    std::normal_distribution<double> jitter(0.0, 1.0);
    rep.est3_ratio = std::numeric_limits<double>::infinity();
    for (const auto& lab : res.labyrinths) {
      const EndChart& e = res.ends[static_cast<size_t>(lab.band.end)];
      const size_t k = band_t(lab.band).front();
      const double bound = std::min(0.5, lab.band.r) * par.epsilon * N;
      const double step = 0.125 / std::pow(static_cast<double>(N), 3);
      const int n_steps = static_cast<int>(std::ceil((lab.band.R - lab.band.r) / step));
      for (int pth = 0; pth < opt.est_paths; ++pth) {
        double th = ang(rng);
        cplx w = std::polar(lab.band.r, th);
        double len = 0.0;
        for (int q = 1; q <= n_steps; ++q) {
          th += 0.02 * step / lab.band.r * jitter(rng) * std::pow(static_cast<double>(N), 3);
          const cplx wn = std::polar(lab.band.r + (lab.band.R - lab.band.r) * q / n_steps, th);
          const cplx zm = e.from_chart(0.5 * (w + wn));
          len += std::sqrt(h.density(k, zm)) * std::abs(e.from_chart(wn) - e.from_chart(w));
          w = wn;
        }
        rep.est3_ratio = std::min(rep.est3_ratio, len / bound);
      }
    }
    rep.est_ok = lambda_ok && rep.est1_ratio > 1.0 && rep.est2_ratio > 1.0 && rep.est3_ratio > 1.0;
  }

  // log mu_t = log(1 + lambda t) psi_unit, psi_unit ~ 0 on the core and ~ 1 on the labyrinths
  const Basis basis = log_factor_basis(d, opt.degree);
  std::vector<cplx> pts;
  std::vector<double> target;
  std::vector<double> weight;
  for (cplx z : verification_grid(d, 48, 192))
    if (in_core(res.ends, z)) {
      pts.push_back(z);
      target.push_back(0.0);
      weight.push_back(opt.core_weight);
    }
  const size_t n_core = pts.size();
  for (const auto& lab : res.labyrinths) {
    const EndChart& e = res.ends[static_cast<size_t>(lab.band.end)];
    for (const auto& s : lab.sets)
      for (int a = 0; a < 16; ++a) {
        // golden-ratio offsets so consecutive sets are sampled at different angles
        const double frac = std::fmod((a + 0.5) / 16.0 + 0.6180339887498949 * s.n, 1.0);
        const double phi = s.opening + s.half_gap + (kTwoPi - 2.0 * s.half_gap) * frac;
        pts.push_back(e.from_chart(std::polar(0.5 * (s.r_in + s.r_out), phi)));
        target.push_back(1.0);
        weight.push_back(1.0);
      }
  }
  Eigen::MatrixXcd M(static_cast<Eigen::Index>(pts.size()), basis.size());
  Eigen::VectorXcd rhs(static_cast<Eigen::Index>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) {
    M.row(static_cast<Eigen::Index>(i)) = weight[i] * basis.row(pts[i]);
    rhs(static_cast<Eigen::Index>(i)) = weight[i] * target[i];
  }
  const Eigen::VectorXcd coef = M.colPivHouseholderQr().solve(rhs);
  const HoloFunction psi_unit = basis.make(coef);
  {
    const double c1 = std::log1p(par.lambda);
    for (size_t i = n_core; i < pts.size(); ++i) rep.fit_error = std::max(rep.fit_error, c1 * std::abs(psi_unit(pts[i]) - 1.0));
  }

  // flux controls: two monomials per generator, solved so F1 and F2 keep their periods
  const std::vector<CurveChart> gens = homology_basis(d);
  const size_t l = gens.size();
  const int n_gen = 1024;
  std::vector<HoloFunction> controls;
  for (size_t j = 0; j < l; ++j) {
    const Disk& hd = d.holes[j];
    controls.push_back(HoloFunction({LaurentBlock{hd.center, hd.radius, -1, {1.0}}}));
    controls.push_back(HoloFunction({LaurentBlock{hd.center, hd.radius, 1, {1.0}}}));
  }
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(2 * l));
  res.maps.push_back({u.maps[0], HoloFunction()});
  for (size_t k = 1; k < nt; ++k) {
    const cplx c = std::log1p(par.lambda * u.t[k]);
    std::vector<GeneratorSamples> gs;
    std::vector<std::vector<cplx>> base_psi(l), ctl(l * 2 * l);
    for (size_t j = 0; j < l; ++j) {
      gs.push_back(generator_samples(u.maps[k], gens[j], n_gen));
      for (cplx z : gs[j].z) base_psi[j].push_back(c * psi_unit(z));
      for (size_t q = 0; q < 2 * l; ++q)
        for (cplx z : gs[j].z) ctl[j * 2 * l + q].push_back(controls[q](z));
    }
    auto residual = [&](const Eigen::VectorXcd& x, Eigen::MatrixXcd* jac) {
      Eigen::VectorXcd r(static_cast<Eigen::Index>(2 * l));
      if (jac) jac->setZero(static_cast<Eigen::Index>(2 * l), static_cast<Eigen::Index>(2 * l));
      for (size_t j = 0; j < l; ++j) {
        cplx rm = 0.0, rp = 0.0;
        std::vector<cplx> dm(2 * l, 0.0), dp(2 * l, 0.0);
        for (int s = 0; s < n_gen; ++s) {
          cplx ps = base_psi[j][static_cast<size_t>(s)];
          for (size_t q = 0; q < 2 * l; ++q) ps += x(static_cast<Eigen::Index>(q)) * ctl[j * 2 * l + q][static_cast<size_t>(s)];
          const cplx mu = std::exp(ps);
          const cplx a = gs[j].m[static_cast<size_t>(s)] / mu, b = gs[j].p[static_cast<size_t>(s)] * mu;
          rm += a - gs[j].m[static_cast<size_t>(s)];
          rp += b - gs[j].p[static_cast<size_t>(s)];
          if (jac)
            for (size_t q = 0; q < 2 * l; ++q) {
              dm[q] -= a * ctl[j * 2 * l + q][static_cast<size_t>(s)];
              dp[q] += b * ctl[j * 2 * l + q][static_cast<size_t>(s)];
            }
        }
        r(static_cast<Eigen::Index>(2 * j)) = rm / static_cast<double>(n_gen);
        r(static_cast<Eigen::Index>(2 * j + 1)) = rp / static_cast<double>(n_gen);
        if (jac)
          for (size_t q = 0; q < 2 * l; ++q) {
            (*jac)(static_cast<Eigen::Index>(2 * j), static_cast<Eigen::Index>(q)) = dm[q] / static_cast<double>(n_gen);
            (*jac)(static_cast<Eigen::Index>(2 * j + 1), static_cast<Eigen::Index>(q)) = dp[q] / static_cast<double>(n_gen);
          }
      }
      return r;
    };
    double scale = 1e-300;
    for (const auto& g : gs)
      for (size_t s = 0; s < g.m.size(); ++s) scale = std::max({scale, std::abs(g.m[s]), std::abs(g.p[s])});
    Eigen::MatrixXcd J;
    for (int it = 0; it < 50; ++it) {
      const Eigen::VectorXcd r = residual(w, &J);
      if (r.cwiseAbs().maxCoeff() <= 1e-14 * scale) break;
      const Eigen::VectorXcd dx = J.colPivHouseholderQr().solve(r);
      double step = 1.0;
      const double r0 = r.norm();
      while (step > 1e-6 && residual(w - step * dx, nullptr).norm() >= r0) step *= 0.5;
      w -= step * dx;
      if (it == 49) throw Error(ErrorCode::ContinuationStalled, "flux correction did not converge at t = " + std::to_string(u.t[k]));
    }
    HoloFunction psi = c * psi_unit;
    for (size_t q = 0; q < 2 * l; ++q) psi += w(static_cast<Eigen::Index>(q)) * controls[q];
    res.maps.push_back({u.maps[k], psi});
  }

  // (I)-(III) and the core approximation
  const std::vector<cplx> grid = verification_grid(d, 32, 128);
  rep.anchored = res.maps[0].psi.blocks().empty();
  for (cplx z : grid) rep.anchored = rep.anchored && res.maps[0](z) == u.maps[0](z);
  double fmax = 0.0;
  for (size_t k = 0; k < nt; ++k)
    for (cplx z : grid) {
      const CVec3 a = res.maps[k](z), b = u.maps[k](z);
      rep.third_change = std::max(rep.third_change, std::abs(a(2) - b(2)));
      fmax = std::max(fmax, b.norm());
      if (in_core(res.ends, z)) rep.core_error = std::max(rep.core_error, (a - b).norm());
    }
  rep.core_error /= std::max(fmax, 1e-300);
  for (size_t k = 0; k < nt; ++k) {
    const HoloForm fa = res.maps[k].as_form();
    for (const auto& g : gens) rep.flux_change = std::max(rep.flux_change, (loop_period(fa, g) - loop_period(forms[k], g)).norm());
  }
  rep.I_ok = rep.anchored;
  rep.II_ok = rep.third_change <= 1e-10;
  rep.III_ok = rep.flux_change <= 1e-10;

  // (IV) on every member, (V) at t = 1 with grid refinement
  rep.IV_ok = true;
  for (size_t k = 0; k < nt; ++k) {
    const LopezRosMap& m = res.maps[k];
    const double dk = intrinsic_distance([&](cplx z) { return 0.5 * m(z).squaredNorm(); }, d, x0, opt.distance).distance;
    rep.distance.push_back(dk);
    rep.IV_ok = rep.IV_ok && dk > rep.tau - delta;
  }
  DistanceOptions fin = opt.distance;
  fin.refinements = opt.final_refinements;
  const LopezRosMap& last = res.maps.back();
  rep.final_distance = intrinsic_distance([&](cplx z) { return 0.5 * last(z).squaredNorm(); }, d, x0, fin);
  rep.V_ok = rep.final_distance.distance > 1.0 / delta;

  if (opt.strict && !(rep.IV_ok && rep.V_ok)) {
    std::ostringstream msg;
    msg << "completeness estimate not met: dist(x0, bM) at t = 1 is " << rep.final_distance.distance
        << " (required > " << 1.0 / delta << "), min over t " << *std::min_element(rep.distance.begin(), rep.distance.end())
        << " (required > " << rep.tau - delta << ")";
    throw Error(ErrorCode::EstimateNotMet, msg.str());
  }
  return res;
}

}  // namespace cmi
