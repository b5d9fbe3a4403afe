#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cmi/cli/run.hpp"

using namespace cmi;
using namespace cmi::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cmi_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig catenoid_config(const fs::path& out, Driver d = Driver::FluxToZero) {
  RunConfig c;
  c.catalog = "catenoid";
  c.driver = d;
  c.t_samples = 24;
  c.out = out.string();
  c.verify_n_r = 32;
  c.verify_n_theta = 128;
  return c;
}

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  ADD_FAILURE() << "no ConfigError";
  return "";
}

std::vector<std::string> last_row(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  std::vector<std::string> out;
  std::istringstream row(last);
  std::string cell;
  while (std::getline(row, cell, ',')) out.push_back(cell);
  return out;
}

const fs::path& flux_run() {
  static const fs::path out = [] {
    const fs::path p = scratch("flux");
    std::ostringstream log;
    EXPECT_EQ(run(catenoid_config(p), log), kExitOk) << log.str();
    return p;
  }();
  return out;
}

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  const RunConfig c = parse_config(R"(# comment line
[domain]
outer = 0 0 2
holes = 0 0 0.5
[data]
catalog = catenoid   # trailing comment
[driver]
name = prescribe_flux
target = 0 0 12.5, 1 2 3
[tolerances]
flux = 1e-7
; ini comment
[run]
t_samples = 32
seed = 7
obj_t = 0 0.5 1
obj_grid = 8 16
)");
  ASSERT_TRUE(c.domain.has_value());
  EXPECT_DOUBLE_EQ(c.domain->outer.radius, 2.0);
  ASSERT_EQ(c.domain->holes.size(), 1u);
  EXPECT_EQ(c.catalog, "catenoid");
  EXPECT_EQ(c.driver, Driver::PrescribeFlux);
  ASSERT_EQ(c.target.size(), 2u);
  EXPECT_EQ(c.target[1], Vec3(1, 2, 3));
  EXPECT_DOUBLE_EQ(c.tol_flux, 1e-7);
  EXPECT_EQ(c.t_samples, 32);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.obj_t.size(), 3u);
  EXPECT_EQ(c.obj_n_theta, 16);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of([] { parse_config("[run]\nfoo = 1\n"); }), "run.foo");
  EXPECT_EQ(field_of([] { parse_config("[nowhere]\nx = 1\n"); }), "nowhere");
  EXPECT_EQ(field_of([] { parse_config("[run]\nt_samples = 3.5\n"); }), "run.t_samples");
  EXPECT_EQ(field_of([] { parse_config("[tolerances]\nflux = abc\n"); }), "tolerances.flux");
  EXPECT_EQ(field_of([] { parse_config("[driver]\nname = fly\n"); }), "driver.name");
  EXPECT_EQ(field_of([] { parse_config("[driver]\ntarget = 1 2\n"); }), "driver.target");
  EXPECT_EQ(field_of([] { parse_config("[domain]\nholes = 0 0 1\n"); }), "domain.outer");
  EXPECT_EQ(field_of([] { parse_config("no equals sign\n"); }), "config");
  RunConfig c = parse_config("[data]\ncatalog = catenoid\n[tolerances]\nperiod = -1e-9\n");
  EXPECT_EQ(field_of([&] { c.validate(); }), "tolerances.period");
  c.tol_period = 1e-9;
  c.catalog.clear();
  EXPECT_EQ(field_of([&] { c.validate(); }), "data");
  c.catalog = "catenoid";
  c.driver = Driver::PrescribeFlux;
  EXPECT_EQ(field_of([&] { c.validate(); }), "driver.target");
  c.driver = Driver::FluxToZero;
  c.obj_t = {1.5};
  EXPECT_EQ(field_of([&] { c.validate(); }), "run.obj_t");
  c.obj_t.clear();
  c.domain = CircularDomain::annulus(0.5, 2.0);
  c.domain->holes.push_back({cplx(1.9, 0.0), 0.5});
  EXPECT_EQ(field_of([&] { c.validate(); }), "domain.holes");
}

TEST(Run, ExitCodeContract) {
  std::ostringstream log;
  RunConfig neg = catenoid_config(scratch("neg"));
  neg.tol_flux = -1.0;
  EXPECT_EQ(run(neg, log), kExitUsage);
  EXPECT_NE(log.str().find("tolerances.flux"), std::string::npos);

  RunConfig unknown = catenoid_config(scratch("unknown"));
  unknown.catalog = "gyroid";
  EXPECT_EQ(run(unknown, log), kExitUsage);

  RunConfig missing = catenoid_config(scratch("missing"));
  missing.catalog.clear();
  missing.coefficients = "/nonexistent/coefficients.json";
  EXPECT_EQ(run(missing, log), kExitUsage);

  RunConfig targets = catenoid_config(scratch("targets"), Driver::PrescribeFlux);
  targets.target = {Vec3::Zero(), Vec3::Zero()};
  log.str("");
  EXPECT_EQ(run(targets, log), kExitUsage);
  EXPECT_NE(log.str().find("driver.target"), std::string::npos);

  RunConfig domain = catenoid_config(scratch("domain"));
  domain.domain = CircularDomain::annulus(0.5, 3.0);
  EXPECT_EQ(run(domain, log), kExitUsage);

  RunConfig flat = catenoid_config(scratch("flat"), Driver::PrescribeFlux);
  flat.catalog = "flat_exponential";
  flat.target = {Vec3(0.0, 0.0, 1.0)};
  log.str("");
  EXPECT_EQ(run(flat, log), kExitVerification);
  EXPECT_NE(log.str().find("isotopy"), std::string::npos);

  RunConfig nowhere = catenoid_config(scratch("nowhere"));
  EXPECT_EQ(verify_saved(nowhere, log), kExitUsage);
  EXPECT_EQ(export_meshes(nowhere, log), kExitUsage);
}

TEST(Run, FluxToZeroArtifacts) {
  const fs::path& out = flux_run();
  const std::string trace = slurp(out / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')),
            "t,generator,re_p1,re_p2,re_p3,im_p1,im_p2,im_p3,flux_norm,flux_residual,real_period_residual");
  const auto row = last_row(trace);
  ASSERT_EQ(row.size(), 11u);
  EXPECT_EQ(std::stod(row[0]), 1.0);
  EXPECT_LE(std::stod(row[8]), 1e-8);
  EXPECT_LE(std::stod(row[10]), 1e-9);
  EXPECT_NE(slurp(out / "report.txt").find("status = pass"), std::string::npos);

  std::ostringstream log;
  RunConfig c = catenoid_config(out);
  EXPECT_EQ(verify_saved(c, log), kExitOk) << log.str();
  c.tol_period = 1e-30;
  EXPECT_EQ(verify_saved(c, log), kExitVerification);
}

TEST(Run, DeterministicTraces) {
  const fs::path again = scratch("flux_again");
  std::ostringstream log;
  ASSERT_EQ(run(catenoid_config(again), log), kExitOk);
  EXPECT_EQ(slurp(flux_run() / "trace.csv"), slurp(again / "trace.csv"));
  EXPECT_EQ(slurp(flux_run() / "coefficients.json"), slurp(again / "coefficients.json"));
}

TEST(Run, CoefficientFileSeedsARun) {
  const FamilyFile f = read_family_file((flux_run() / "coefficients.json").string());
  RunConfig c = catenoid_config(scratch("seeded"), Driver::Classify);
  c.catalog.clear();
  c.coefficients = (flux_run() / "coefficients.json").string();
  std::ostringstream log;
  EXPECT_EQ(run(c, log), kExitOk);
  EXPECT_NE(log.str().find("generator 0: class 1"), std::string::npos) << log.str();
  EXPECT_EQ(f.driver, "flux_to_zero");
}

TEST(Family, JsonRoundTripIsExact) {
  const FamilyFile f = read_family_file((flux_run() / "coefficients.json").string());
  std::stringstream s;
  write_family(s, f);
  const FamilyFile g = read_family(s);
  ASSERT_EQ(f.maps.size(), g.maps.size());
  EXPECT_EQ(f.t, g.t);
  for (size_t k = 0; k < f.maps.size(); ++k) {
    EXPECT_EQ(f.maps[k].tags, g.maps[k].tags);
    ASSERT_EQ(f.maps[k].A.blocks().size(), g.maps[k].A.blocks().size());
    for (size_t b = 0; b < f.maps[k].A.blocks().size(); ++b)
      EXPECT_EQ(f.maps[k].A.blocks()[b].coeffs, g.maps[k].A.blocks()[b].coeffs);
  }
  // the t = 0 member reproduces the catalog data
  const SpinorImmersion u = spinor_catalog("catenoid");
  for (cplx z : {cplx(1.0, 0.2), cplx(-0.7, 0.9)}) EXPECT_EQ(f.form(0)(z), u.map(z));

  std::istringstream bad(R"({"format": "other", "version": 1})");
  EXPECT_THROW(read_family(bad), ConfigError);
  std::istringstream broken("{ not json");
  EXPECT_THROW(read_family(broken), ConfigError);
}

TEST(Classify, ConsistentAcrossSeeds) {
  const SpinorImmersion u = spinor_catalog("catenoid");
  std::set<double> phases;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ClassifyResult r = classify_generators(u.map.as_form(), u.map.domain, seed);
    ASSERT_EQ(r.classes.size(), 1u);
    EXPECT_EQ(r.classes[0], 1);
    phases.insert(r.phase);
  }
  EXPECT_EQ(phases.size(), 5u);
  std::ostringstream log;
  const fs::path out = scratch("classify");
  EXPECT_EQ(run(catenoid_config(out, Driver::Classify), log), kExitOk);
  EXPECT_NE(slurp(out / "report.txt").find("component = (1)"), std::string::npos);
}

TEST(Mesh, MatchesPathIntegration) {
  const SpinorImmersion u = spinor_catalog("catenoid");
  const CircularDomain& d = u.map.domain;
  const int n_r = 6, n_theta = 12;
  const Mesh m = surface_mesh(u.map.as_form(), d, u.basepoint, u.value, n_r, n_theta, 1e-9);
  ASSERT_EQ(m.vertices.size(), static_cast<size_t>((n_r + 1) * n_theta));
  EXPECT_EQ(m.faces.size(), static_cast<size_t>(2 * n_r * n_theta));
  const MinimalImmersion ref = make_immersion(u.map.as_form(), d, u.basepoint, u.value);
  const double inset = 1e-3 * 1.5;
  for (int j = 0; j < n_theta; j += 5)
    for (int i = 0; i <= n_r; i += 3) {
      const double r = 0.5 + inset + (1.5 - 2.0 * inset) * i / n_r;
      const Vec3 v = m.vertices[static_cast<size_t>(j * (n_r + 1) + i)];
      EXPECT_LE((v - ref(std::polar(r, kTwoPi * j / n_theta))).norm(), 1e-8);
    }
  // u(1) = 0 puts the catenoid axis through (1, 0), and the distance to it depends on x3 alone
  const auto rad = [](const Vec3& v) { return std::hypot(v(0) - 1.0, v(1)); };
  for (int i = 0; i <= n_r; ++i)
    EXPECT_NEAR(rad(m.vertices[static_cast<size_t>(i)]), rad(m.vertices[static_cast<size_t>(7 * (n_r + 1) + i)]), 1e-10);

  std::ostringstream obj;
  write_obj(obj, m, 0.25);
  EXPECT_NE(obj.str().find("# t = 0.25\n"), std::string::npos);
  EXPECT_NE(obj.str().find("\nf 1 2 "), std::string::npos);
}

TEST(Labyrinths, PolygonCsv) {
  const auto ends = end_charts(default_annulus());
  const Labyrinth lab = build_labyrinth({1, 0, 1.3, 1.99}, 3);
  std::ostringstream s;
  write_labyrinths(s, {lab}, ends, 4);
  std::istringstream in(s.str());
  std::string line;
  int rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "labyrinth,end,bracket,N,set,vertex,x,y");
  while (std::getline(in, line)) {
    ++rows;
    std::vector<double> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
    ASSERT_EQ(cells.size(), 8u);
    // hole end: polygons lie between the hole and the core
    const double r = std::hypot(cells[6], cells[7]);
    EXPECT_GT(r, 0.5);
    EXPECT_LT(r, 1.0);
  }
  EXPECT_EQ(rows, 18 * 8);
}
