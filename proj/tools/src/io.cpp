#include "cmi/cli/io.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "cmi/cli/config.hpp"

namespace cmi::cli {

using nlohmann::json;

namespace {

json to_json(cplx z) { return json::array({z.real(), z.imag()}); }
json to_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }
json to_json(const Disk& d) { return json::array({d.center.real(), d.center.imag(), d.radius}); }

json to_json(const HoloFunction& f) {
  json blocks = json::array();
  for (const LaurentBlock& b : f.blocks()) {
    json re = json::array(), im = json::array();
    for (cplx c : b.coeffs) {
      re.push_back(c.real());
      im.push_back(c.imag());
    }
    blocks.push_back({{"center", to_json(b.center)}, {"scale", b.scale}, {"min_exp", b.min_exp}, {"re", re}, {"im", im}});
  }
  return blocks;
}

cplx cplx_of(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
Vec3 vec_of(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
Disk disk_of(const json& j) { return {cplx(j.at(0).get<double>(), j.at(1).get<double>()), j.at(2).get<double>()}; }

HoloFunction holo_of(const json& j) {
  HoloFunction f;
  for (const json& b : j) {
    LaurentBlock blk;
    blk.center = cplx_of(b.at("center"));
    blk.scale = b.at("scale").get<double>();
    blk.min_exp = b.at("min_exp").get<int>();
    const auto re = b.at("re").get<std::vector<double>>();
    const auto im = b.at("im").get<std::vector<double>>();
    if (re.size() != im.size()) throw ConfigError("coefficients", "re and im of a block differ in length");
    for (size_t k = 0; k < re.size(); ++k) blk.coeffs.emplace_back(re[k], im[k]);
    f.add_block(std::move(blk));
  }
  return f;
}

// Gauss-Legendre nodes and weights on [0, 1].
constexpr std::array<double, 5> kGLx = {0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155,
                                        0.95308992296933200};
constexpr std::array<double, 5> kGLw = {0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                        0.23931433524968324, 0.11846344252809454};

Vec3 segment_integral(const HoloForm& form, cplx a, cplx b) {
  CVec3 s = CVec3::Zero();
  for (size_t k = 0; k < kGLx.size(); ++k) s += kGLw[k] * form(a + kGLx[k] * (b - a));
  return (s * (b - a)).real();
}

}  // namespace

HoloForm FamilyFile::form(size_t k) const {
  if (psi.empty()) return maps[k].as_form();
  return LopezRosMap{maps[k], psi[k]}.as_form();
}

ImmersionFamily FamilyFile::family() const {
  ImmersionFamily f;
  f.t = t;
  f.maps = maps;
  f.basepoint = basepoint;
  f.value = value;
  f.target = target;
  return f;
}

FamilyFile from_family(const ImmersionFamily& f, const std::string& driver) {
  FamilyFile out;
  out.driver = driver;
  out.domain = f.maps.front().domain;
  out.basepoint = f.basepoint;
  out.value = f.value;
  out.target = f.target;
  out.t = f.t;
  out.maps = f.maps;
  return out;
}

FamilyFile from_completion(const CompletionResult& r, const ImmersionFamily& input) {
  FamilyFile out = from_family(input, "complete_step");
  out.t = r.t;
  out.maps.clear();
  for (const LopezRosMap& m : r.maps) {
    out.maps.push_back(m.base);
    out.psi.push_back(m.psi);
  }
  return out;
}

void write_family(std::ostream& out, const FamilyFile& f) {
  json holes = json::array();
  for (const Disk& h : f.domain.holes) holes.push_back(to_json(h));
  json target = json::array();
  for (const Vec3& v : f.target) target.push_back(to_json(v));
  json members = json::array();
  for (size_t k = 0; k < f.maps.size(); ++k) {
    json m = {{"t", f.t[k]}, {"tags", f.maps[k].tags}, {"A", to_json(f.maps[k].A)}, {"B", to_json(f.maps[k].B)}};
    if (!f.psi.empty()) m["psi"] = to_json(f.psi[k]);
    members.push_back(std::move(m));
  }
  const json j = {{"format", "cmi-family"},
                  {"version", 1},
                  {"driver", f.driver},
                  {"domain", {{"outer", to_json(f.domain.outer)}, {"holes", holes}}},
                  {"basepoint", to_json(f.basepoint)},
                  {"value", to_json(f.value)},
                  {"target", target},
                  {"members", members}};
  out << j.dump(1) << '\n';
}

FamilyFile read_family(std::istream& in) {
  FamilyFile f;
  try {
    const json j = json::parse(in);
    if (j.at("format") != "cmi-family" || j.at("version") != 1)
      throw ConfigError("coefficients", "not a cmi-family version 1 file");
    f.driver = j.at("driver").get<std::string>();
    std::vector<Disk> holes;
    for (const json& h : j.at("domain").at("holes")) holes.push_back(disk_of(h));
    f.domain = CircularDomain(disk_of(j.at("domain").at("outer")), holes);
    f.basepoint = cplx_of(j.at("basepoint"));
    f.value = vec_of(j.at("value"));
    for (const json& v : j.at("target")) f.target.push_back(vec_of(v));
    for (const json& m : j.at("members")) {
      f.t.push_back(m.at("t").get<double>());
      SpinorMap s;
      s.domain = f.domain;
      s.tags = m.at("tags").get<std::vector<int>>();
      s.A = holo_of(m.at("A"));
      s.B = holo_of(m.at("B"));
      if (s.tags.size() != f.domain.holes.size()) throw ConfigError("coefficients", "one tag per hole expected");
      f.maps.push_back(std::move(s));
      if (m.contains("psi")) f.psi.push_back(holo_of(m.at("psi")));
    }
  } catch (const json::exception& e) {
    throw ConfigError("coefficients", e.what());
  } catch (const Error& e) {
    throw ConfigError("coefficients", e.what());
  }
  if (f.maps.empty()) throw ConfigError("coefficients", "no members");
  if (!f.psi.empty() && f.psi.size() != f.maps.size())
    throw ConfigError("coefficients", "psi must be given for every member or none");
  return f;
}

FamilyFile read_family_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("coefficients", "cannot read '" + path + "'");
  return read_family(in);
}

void write_trace(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "t,generator,re_p1,re_p2,re_p3,im_p1,im_p2,im_p3,flux_norm,flux_residual,real_period_residual\n";
  out << std::setprecision(17);
  for (const TraceRow& r : rows) {
    out << r.t << ',' << r.generator;
    for (int i = 0; i < 3; ++i) out << ',' << r.period(i).real();
    for (int i = 0; i < 3; ++i) out << ',' << r.period(i).imag();
    out << ',' << r.period.imag().norm() << ',' << r.flux_residual << ',' << r.period.real().norm() << '\n';
  }
}

Mesh surface_mesh(const HoloForm& form, const CircularDomain& d, cplx basepoint, const Vec3& value, int n_r,
                  int n_theta, double tol_period) {
  const MinimalImmersion u = make_immersion(form, d, basepoint, value, tol_period);
  const cplx c = d.outer.center;
  const double R = d.outer.radius;
  double r_lo = 0.0;
  for (const Disk& h : d.holes)
    if (std::abs(h.center - c) < h.radius) r_lo = std::max(r_lo, std::abs(h.center - c) + h.radius);
  const double inset = 1e-3 * (R - r_lo);
  std::vector<double> radii(static_cast<size_t>(n_r) + 1);
  for (int i = 0; i <= n_r; ++i) radii[static_cast<size_t>(i)] = r_lo + inset + (R - r_lo - 2.0 * inset) * i / n_r;

  Mesh m;
  std::vector<int> index(radii.size() * static_cast<size_t>(n_theta), -1);
  for (int j = 0; j < n_theta; ++j) {
    const cplx dir = std::polar(1.0, kTwoPi * j / n_theta);
    bool live = false;
    Vec3 prev = Vec3::Zero();
    cplx z_prev = 0.0;
    for (size_t i = 0; i < radii.size(); ++i) {
      const cplx z = c + radii[i] * dir;
      if (!d.contains(z)) {
        live = false;
        continue;
      }
      prev = live ? Vec3(prev + segment_integral(form, z_prev, z)) : u(z);
      live = true;
      z_prev = z;
      index[i * static_cast<size_t>(n_theta) + static_cast<size_t>(j)] = static_cast<int>(m.vertices.size());
      m.vertices.push_back(prev);
    }
  }
  const auto at = [&](size_t i, int j) { return index[i * static_cast<size_t>(n_theta) + static_cast<size_t>(j % n_theta)]; };
  for (size_t i = 0; i + 1 < radii.size(); ++i)
    for (int j = 0; j < n_theta; ++j) {
      const int a = at(i, j), b = at(i + 1, j), cc = at(i + 1, j + 1), e = at(i, j + 1);
      if (a >= 0 && b >= 0 && cc >= 0) m.faces.push_back({a, b, cc});
      if (a >= 0 && cc >= 0 && e >= 0) m.faces.push_back({a, cc, e});
    }
  return m;
}

void write_obj(std::ostream& out, const Mesh& m, double t) {
  out << std::setprecision(17);
  out << "# cmi surface u_t\n# t = " << t << "\n# vertices " << m.vertices.size() << " faces " << m.faces.size()
      << "\n";
  for (const Vec3& v : m.vertices) out << "v " << v(0) << ' ' << v(1) << ' ' << v(2) << '\n';
  for (const auto& f : m.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void write_labyrinths(std::ostream& out, const std::vector<Labyrinth>& labs, const std::vector<EndChart>& ends,
                      int arc_points) {
  out << "labyrinth,end,bracket,N,set,vertex,x,y\n";
  out << std::setprecision(17);
  for (size_t l = 0; l < labs.size(); ++l) {
    const Labyrinth& lab = labs[l];
    const EndChart& e = ends[static_cast<size_t>(lab.band.end)];
    for (const LabyrinthSet& s : lab.sets) {
      const double a0 = s.opening + s.half_gap, a1 = s.opening + kTwoPi - s.half_gap;
      int v = 0;
      const auto emit = [&](double r, double a) {
        const cplx z = e.from_chart(std::polar(r, a));
        out << l << ',' << lab.band.end << ',' << lab.band.k << ',' << lab.N << ',' << s.n << ',' << v++ << ','
            << z.real() << ',' << z.imag() << '\n';
      };
      for (int k = 0; k < arc_points; ++k) emit(s.r_out, a0 + (a1 - a0) * k / (arc_points - 1));
      for (int k = arc_points - 1; k >= 0; --k) emit(s.r_in, a0 + (a1 - a0) * k / (arc_points - 1));
    }
  }
}

}  // namespace cmi::cli
