#include "cmi/cli/run.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace cmi::cli {

namespace fs = std::filesystem;

namespace {

class Report {
 public:
  Report() { out_ << std::setprecision(10); }
  void section(const std::string& name) {
    if (!first_) out_ << '\n';
    out_ << '[' << name << "]\n";
    first_ = false;
  }
  template <class T>
  void put(const std::string& key, const T& v) {
    out_ << key << " = " << v << '\n';
  }
  void put(const std::string& key, bool v) { out_ << key << " = " << (v ? "true" : "false") << '\n'; }
  void put(const std::string& key, const Vec3& v) { out_ << key << " = " << v(0) << ' ' << v(1) << ' ' << v(2) << '\n'; }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  bool first_ = true;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("run.out", "cannot write '" + p.string() + "'");
  out << text;
}

template <class F>
void write_stream(const fs::path& p, F&& fill) {
  std::ostringstream s;
  fill(s);
  write_file(p, s.str());
}

bool same_domain(const CircularDomain& a, const CircularDomain& b) {
  const auto same = [](const Disk& x, const Disk& y) {
    return std::abs(x.center - y.center) <= 1e-12 && std::abs(x.radius - y.radius) <= 1e-12;
  };
  if (!same(a.outer, b.outer) || a.holes.size() != b.holes.size()) return false;
  for (size_t j = 0; j < a.holes.size(); ++j)
    if (!same(a.holes[j], b.holes[j])) return false;
  return true;
}

bool same_coefficients(const HoloFunction& a, const HoloFunction& b) {
  if (a.blocks().size() != b.blocks().size()) return false;
  for (size_t i = 0; i < a.blocks().size(); ++i) {
    const LaurentBlock &x = a.blocks()[i], &y = b.blocks()[i];
    if (x.center != y.center || x.scale != y.scale || x.min_exp != y.min_exp || x.coeffs != y.coeffs) return false;
  }
  return true;
}

SpinorImmersion initial_data(const RunConfig& c) {
  SpinorImmersion u;
  if (!c.catalog.empty()) {
    try {
      u = spinor_catalog(c.catalog);
    } catch (const Error& e) {
      throw ConfigError("data.catalog", e.what());
    }
  } else {
    const FamilyFile f = read_family_file(c.coefficients);
    if (!f.psi.empty()) throw ConfigError("data.coefficients", "members with a log-factor cannot seed a run");
    u = {f.maps.back(), f.basepoint, f.value};
  }
  if (c.domain && !same_domain(*c.domain, u.map.domain))
    throw ConfigError("domain", "does not match the domain of the initial data");
  return u;
}

IsotopyOptions isotopy_options(const RunConfig& c) {
  IsotopyOptions o;
  o.n_t = c.t_samples;
  o.tol.flux = c.tol_flux;
  o.tol.period = c.tol_period;
  o.tol.conf = c.tol_conf;
  o.tol.null = c.tol_conf;
  return o;
}

Tolerances tolerances(const RunConfig& c) { return isotopy_options(c).tol; }

std::vector<TraceRow> trace(const FamilyFile& f, const std::vector<std::vector<Vec3>>& expected) {
  const std::vector<CurveChart> gens = homology_basis(f.domain);
  std::vector<TraceRow> rows;
  for (size_t k = 0; k < f.maps.size(); ++k) {
    const HoloForm form = f.form(k);
    for (size_t g = 0; g < gens.size(); ++g) {
      TraceRow r;
      r.t = f.t[k];
      r.generator = static_cast<int>(g);
      r.period = loop_period(form, gens[g]);
      r.flux_residual = (r.period.imag() - expected[k][g]).norm();
      rows.push_back(r);
    }
  }
  return rows;
}

void put_verification(Report& rep, const VerificationReport& v) {
  rep.put("grid", std::to_string(v.n_r) + " " + std::to_string(v.n_theta));
  rep.put("max_conformality", v.max_conformality);
  rep.put("max_real_period", v.max_real_period);
  rep.put("min_metric", v.min_metric);
  rep.put("null_curve_period", v.null_curve_period);
  rep.put("conformality_ok", v.conformality_ok);
  rep.put("periods_ok", v.periods_ok);
  rep.put("metric_ok", v.metric_ok);
  rep.put("nonflat_ok", v.nonflat_ok);
  for (size_t g = 0; g < v.flux.back().size(); ++g) rep.put("flux_final." + std::to_string(g), v.flux.back()[g]);
  for (size_t g = 0; g < v.pi1.back().size(); ++g)
    rep.put("pi1." + std::to_string(g), std::to_string(v.pi1.front()[g]) + " -> " + std::to_string(v.pi1.back()[g]));
}

size_t nearest(const std::vector<double>& t, double s) {
  size_t best = 0;
  for (size_t k = 1; k < t.size(); ++k)
    if (std::abs(t[k] - s) < std::abs(t[best] - s)) best = k;
  return best;
}

void write_meshes(const FamilyFile& f, const RunConfig& c, std::vector<double> ts, std::ostream& log) {
  for (double s : ts) {
    const size_t k = nearest(f.t, s);
    const Mesh m =
        surface_mesh(f.form(k), f.domain, f.basepoint, f.value, c.obj_n_r, c.obj_n_theta, c.tol_period);
    std::ostringstream name;
    name << "u_" << std::setw(4) << std::setfill('0') << k << ".obj";
    write_stream(fs::path(c.out) / name.str(), [&](std::ostream& o) { write_obj(o, m, f.t[k]); });
    log << "wrote " << (fs::path(c.out) / name.str()).string() << '\n';
  }
}

std::vector<std::vector<Vec3>> constant_expectation(const FamilyFile& f, const std::vector<Vec3>& target) {
  return std::vector<std::vector<Vec3>>(f.maps.size(), target);
}

int classify_driver(const RunConfig& c, const SpinorImmersion& u, std::ostream& log) {
  const ClassifyResult r = classify_generators(u.map.as_form(), u.map.domain, c.seed);
  Report rep;
  rep.section("run");
  rep.put("driver", "classify");
  rep.put("seed", c.seed);
  rep.put("samples", r.n_samples);
  rep.put("phase", r.phase);
  rep.section("classes");
  std::string label = "(";
  for (size_t g = 0; g < r.classes.size(); ++g) {
    rep.put("generator." + std::to_string(g), r.classes[g]);
    log << "generator " << g << ": class " << r.classes[g] << '\n';
    label += (g ? "," : "") + std::to_string(r.classes[g]);
  }
  label += ")";
  rep.put("component", label);
  rep.section("result");
  rep.put("status", "pass");
  log << "component " << label << '\n';
  write_file(fs::path(c.out) / "report.txt", rep.str());
  return kExitOk;
}

int isotopy_driver(const RunConfig& c, const SpinorImmersion& u, std::ostream& log) {
  const IsotopyOptions o = isotopy_options(c);
  ImmersionFamily fam;
  if (c.driver == Driver::FluxToZero) {
    fam = flux_to_zero(u, o);
  } else {
    if (static_cast<int>(c.target.size()) != u.map.domain.rank())
      throw ConfigError("driver.target", "expected " + std::to_string(u.map.domain.rank()) + " targets");
    fam = prescribe_flux(u, c.target, o);
  }
  const VerificationReport v = verify(fam, c.verify_n_r, c.verify_n_theta, o.tol);
  const FamilyFile file = from_family(fam, to_string(c.driver));
  const std::vector<TraceRow> rows = trace(file, constant_expectation(file, fam.target));

  double final_flux = 0.0;
  for (const TraceRow& r : rows)
    if (r.t == fam.t.back()) final_flux = std::max(final_flux, r.flux_residual);
  const bool anchored = same_coefficients(fam.maps.front().A, u.map.A) && same_coefficients(fam.maps.front().B, u.map.B);
  const bool closes = c.driver != Driver::FluxToZero || v.null_curve_period <= c.tol_flux;
  const bool pass = v.ok() && final_flux <= c.tol_flux && anchored && closes;

  Report rep;
  rep.section("run");
  rep.put("driver", to_string(c.driver));
  rep.put("t_samples", fam.t.size());
  rep.put("degree", fam.degree);
  rep.put("constant", fam.constant);
  if (!fam.notice.empty()) rep.put("notice", fam.notice);
  rep.put("max_runge_error", fam.max_runge_error);
  rep.section("verification");
  put_verification(rep, v);
  rep.put("final_flux_residual", final_flux);
  rep.put("anchored", anchored);
  rep.put("null_curve_closes", closes);
  rep.section("result");
  rep.put("status", pass ? "pass" : "fail");

  write_stream(fs::path(c.out) / "coefficients.json", [&](std::ostream& s) { write_family(s, file); });
  write_stream(fs::path(c.out) / "trace.csv", [&](std::ostream& s) { write_trace(s, rows); });
  write_file(fs::path(c.out) / "report.txt", rep.str());
  write_meshes(file, c, c.obj_t, log);
  log << to_string(c.driver) << ": final flux residual " << final_flux << ", conformality " << v.max_conformality
      << ", real periods " << v.max_real_period << " -> " << (pass ? "pass" : "fail") << '\n';
  if (!pass) {
    if (!v.conformality_ok) log << "isotopy: conformality residual above tolerances.conf\n";
    if (!v.periods_ok) log << "isotopy: real period above tolerances.period\n";
    if (!v.metric_ok) log << "isotopy: metric degenerates on the verification grid\n";
    if (final_flux > c.tol_flux) log << "isotopy: flux target missed by more than tolerances.flux\n";
    if (!anchored) log << "isotopy: t = 0 member differs from the input\n";
    if (!closes) log << "isotopy: null curve periods above tolerances.flux\n";
  }
  return pass ? kExitOk : kExitVerification;
}

int completion_driver(const RunConfig& c, const SpinorImmersion& u, std::ostream& log) {
  ImmersionFamily fam;
  if (c.constant_family) {
    for (int k = 0; k < c.t_samples; ++k) fam.t.push_back(static_cast<double>(k) / (c.t_samples - 1));
    fam.maps.assign(fam.t.size(), u.map);
    fam.basepoint = u.basepoint;
    fam.value = u.value;
    fam.constant = true;
  } else {
    fam = flux_to_zero(u, isotopy_options(c));
  }
  CompletionOptions opt;
  opt.strict = false;
  opt.seed = c.seed;
  const CompletionResult r = complete_step(fam, c.delta, opt);
  const CompletionReport& q = r.report;

  const FamilyFile file = from_completion(r, fam);
  const FamilyFile input = from_family(fam, "input");
  std::vector<std::vector<Vec3>> expected;
  const std::vector<CurveChart> gens = homology_basis(file.domain);
  for (size_t k = 0; k < input.maps.size(); ++k) {
    std::vector<Vec3> row;
    for (const CurveChart& g : gens) row.push_back(flux(input.form(k), g));
    expected.push_back(row);
  }
  const std::vector<TraceRow> rows = trace(file, expected);
  double flux_change = 0.0;
  for (const TraceRow& row : rows) flux_change = std::max(flux_change, row.flux_residual);

  Report rep;
  rep.section("run");
  rep.put("driver", "complete_step");
  rep.put("family", c.constant_family ? "constant" : "flux_to_zero");
  rep.put("delta", q.delta);
  rep.put("seed", c.seed);
  rep.section("parameters");
  rep.put("N", r.params.N);
  rep.put("lambda", r.params.lambda);
  rep.put("epsilon", r.params.epsilon);
  rep.put("c0", r.params.c0);
  rep.put("t0", r.params.t0);
  for (size_t b = 0; b < r.bands.bands.size(); ++b) {
    const AnnulusBand& band = r.bands.bands[b];
    rep.put("band." + std::to_string(b), "end " + std::to_string(band.end) + " bracket " + std::to_string(band.k) +
                                             " r " + std::to_string(band.r) + " R " + std::to_string(band.R));
  }
  rep.section("estimates");
  rep.put("tau", q.tau);
  double min_dist = q.distance.empty() ? 0.0 : q.distance.front();
  for (double d : q.distance) min_dist = std::min(min_dist, d);
  rep.put("min_distance", min_dist);
  rep.put("final_distance", q.final_distance.distance);
  rep.put("final_distance_grid",
          std::to_string(q.final_distance.n_r) + " " + std::to_string(q.final_distance.n_theta));
  rep.put("final_distance_change", q.final_distance.change);
  rep.put("required_distance", std::max(1.0 / q.delta, q.tau - q.delta));
  rep.put("third_change", q.third_change);
  rep.put("flux_change", q.flux_change);
  rep.put("trace_flux_change", flux_change);
  rep.put("est1_ratio", q.est1_ratio);
  rep.put("est2_ratio", q.est2_ratio);
  rep.put("est3_ratio", q.est3_ratio);
  rep.put("core_error", q.core_error);
  rep.put("fit_error", q.fit_error);
  rep.section("checks");
  rep.put("I", q.I_ok);
  rep.put("II", q.II_ok);
  rep.put("III", q.III_ok);
  rep.put("IV", q.IV_ok);
  rep.put("V", q.V_ok);
  rep.put("estimates", q.est_ok);
  rep.put("anchored", q.anchored);
  rep.section("result");
  rep.put("status", q.ok() ? "pass" : "fail");

  write_stream(fs::path(c.out) / "coefficients.json", [&](std::ostream& s) { write_family(s, file); });
  write_stream(fs::path(c.out) / "trace.csv", [&](std::ostream& s) { write_trace(s, rows); });
  write_stream(fs::path(c.out) / "labyrinths.csv", [&](std::ostream& s) { write_labyrinths(s, r.labyrinths, r.ends); });
  write_file(fs::path(c.out) / "report.txt", rep.str());
  write_meshes(file, c, c.obj_t, log);
  log << "complete_step: N " << r.params.N << ", lambda " << r.params.lambda << ", distance "
      << q.final_distance.distance << " (required > " << std::max(1.0 / q.delta, q.tau - q.delta) << ") -> "
      << (q.ok() ? "pass" : "fail") << '\n';
  if (!q.I_ok) log << "labyrinth: (I) core approximation outside tolerance\n";
  if (!q.II_ok) log << "labyrinth: (II) third component changed\n";
  if (!q.III_ok) log << "labyrinth: (III) flux changed\n";
  if (!q.IV_ok) log << "labyrinth: (IV) distance fell below tau - delta\n";
  if (!q.V_ok) log << "labyrinth: (V) distance to the boundary not above 1/delta\n";
  if (!q.est_ok) log << "labyrinth: est1/est2/est3 violated\n";
  return q.ok() ? kExitOk : kExitVerification;
}

}  // namespace

const char* module_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotOnQuadric:
    case ErrorCode::ZeroPoint:
    case ErrorCode::ZeroBase:
    case ErrorCode::UndersampledLoop:
      return "nullquadric";
    case ErrorCode::InvalidPair:
    case ErrorCode::NotImmersion:
    case ErrorCode::RootNotFound:
    case ErrorCode::SegmentOverlap:
    case ErrorCode::NonflatViolated:
    case ErrorCode::PerturbationFailed:
    case ErrorCode::EmptySegment:
    case ErrorCode::ContinuationStalled:
      return "loops";
    case ErrorCode::DegenerateLoop:
    case ErrorCode::DominationFailed:
    case ErrorCode::ThirdComponentVanishes:
    case ErrorCode::LeftDomain:
      return "sprays";
    case ErrorCode::GaussMapVanishes:
    case ErrorCode::DegenerateDenominator:
    case ErrorCode::RealPeriodNonzero:
    case ErrorCode::UnknownName:
      return "weierstrass";
    case ErrorCode::NoClearance:
    case ErrorCode::ApproximationBudgetExceeded:
    case ErrorCode::VanishingOnDomain:
      return "riemann";
    case ErrorCode::FlatInput:
      return "isotopy";
    case ErrorCode::NoBandFound:
    case ErrorCode::BandTooThin:
    case ErrorCode::GaussMapTooSmall:
    case ErrorCode::DisconnectedGraph:
    case ErrorCode::EstimateNotMet:
      return "labyrinth";
    case ErrorCode::InvalidArgument:
      return "core";
  }
  return "core";
}

ClassifyResult classify_generators(const HoloForm& form, const CircularDomain& d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ClassifyResult r;
  r.phase = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  r.n_samples = 512 << std::uniform_int_distribution<int>(0, 2)(rng);
  for (const CurveChart& c : homology_basis(d)) {
    std::vector<CVec3> s(static_cast<size_t>(r.n_samples));
    for (int k = 0; k < r.n_samples; ++k) {
      const double x = r.phase + static_cast<double>(k) / r.n_samples;
      s[static_cast<size_t>(k)] = form(c.z(x)) * c.dz(x);
    }
    r.classes.push_back(pi1_class(PeriodicPath(std::move(s))));
  }
  return r;
}

int run(const RunConfig& c, std::ostream& log) {
  try {
    c.validate();
    const SpinorImmersion u = initial_data(c);
    fs::create_directories(c.out);
    switch (c.driver) {
      case Driver::Classify:
        return classify_driver(c, u, log);
      case Driver::CompleteStep:
        return completion_driver(c, u, log);
      default:
        return isotopy_driver(c, u, log);
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    log << "error in " << module_of(e.code()) << " (" << to_string(e.code()) << "): " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidArgument ? kExitUsage : kExitVerification;
  } catch (const fs::filesystem_error& e) {
    log << "config error: run.out: " << e.what() << '\n';
    return kExitUsage;
  }
}

int verify_saved(const RunConfig& c, std::ostream& log) {
  try {
    c.validate(false);
    const FamilyFile f = read_family_file((fs::path(c.out) / "coefficients.json").string());
    Report rep;
    rep.section("verify");
    rep.put("driver", f.driver);
    bool pass = true;
    if (f.psi.empty()) {
      const VerificationReport v = verify(f.family(), c.verify_n_r, c.verify_n_theta, tolerances(c));
      double final_flux = 0.0;
      for (size_t g = 0; g < f.target.size() && g < v.flux.back().size(); ++g)
        final_flux = std::max(final_flux, (v.flux.back()[g] - f.target[g]).norm());
      put_verification(rep, v);
      rep.put("final_flux_residual", final_flux);
      pass = v.ok() && final_flux <= c.tol_flux;
    } else {
      const std::vector<cplx> grid = verification_grid(f.domain, c.verify_n_r, c.verify_n_theta);
      const std::vector<CurveChart> gens = homology_basis(f.domain);
      double conf = 0.0, real_period = 0.0;
      for (size_t k = 0; k < f.maps.size(); ++k) {
        const HoloForm form = f.form(k);
        conf = std::max(conf, conformality_residual(form, grid));
        for (const CurveChart& g : gens) real_period = std::max(real_period, loop_period(form, g).real().norm());
      }
      rep.put("max_conformality", conf);
      rep.put("max_real_period", real_period);
      pass = conf <= c.tol_conf && real_period <= c.tol_period;
    }
    rep.put("status", pass ? "pass" : "fail");
    log << rep.str();
    write_file(fs::path(c.out) / "verify_report.txt", rep.str());
    return pass ? kExitOk : kExitVerification;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    log << "error in " << module_of(e.code()) << " (" << to_string(e.code()) << "): " << e.what() << '\n';
    return kExitVerification;
  }
}

int export_meshes(const RunConfig& c, std::ostream& log) {
  try {
    c.validate(false);
    const FamilyFile f = read_family_file((fs::path(c.out) / "coefficients.json").string());
    write_meshes(f, c, c.obj_t.empty() ? std::vector<double>{0.0, 1.0} : c.obj_t, log);
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    log << "error in " << module_of(e.code()) << " (" << to_string(e.code()) << "): " << e.what() << '\n';
    return kExitVerification;
  }
}

}  // namespace cmi::cli
