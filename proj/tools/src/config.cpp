#include "cmi/cli/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace cmi::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKeys = {
    {"domain", {"outer", "holes"}},
    {"data", {"catalog", "coefficients"}},
    {"driver", {"name", "target", "delta", "family"}},
    {"tolerances", {"flux", "period", "conf"}},
    {"run", {"t_samples", "seed", "out", "obj_t", "obj_grid", "verify_grid"}},
};

std::vector<double> numbers(const std::string& field, const std::string& s) {
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(field, "not a number: '" + tok + "'");
    }
  }
  return out;
}

// Comma-separated groups of n numbers.
std::vector<std::vector<double>> groups(const std::string& field, const std::string& s, size_t n) {
  std::vector<std::vector<double>> out;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.find_first_not_of(" \t") == std::string::npos) continue;
    auto v = numbers(field, part);
    if (v.size() != n) throw ConfigError(field, "expected groups of " + std::to_string(n) + " numbers");
    out.push_back(std::move(v));
  }
  return out;
}

double number(const std::string& field, const std::string& s) {
  const auto v = numbers(field, s);
  if (v.size() != 1) throw ConfigError(field, "expected one number");
  return v[0];
}

int integer(const std::string& field, const std::string& s) {
  const double v = number(field, s);
  if (v != static_cast<double>(static_cast<long long>(v))) throw ConfigError(field, "expected an integer");
  return static_cast<int>(v);
}

Disk disk(const std::vector<double>& v) { return {cplx(v[0], v[1]), v[2]}; }

std::string strip_comments(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

const char* to_string(Driver d) {
  switch (d) {
    case Driver::FluxToZero:
      return "flux_to_zero";
    case Driver::PrescribeFlux:
      return "prescribe_flux";
    case Driver::CompleteStep:
      return "complete_step";
    case Driver::Classify:
      return "classify";
  }
  return "?";
}

void RunConfig::validate(bool need_data) const {
  if (need_data && catalog.empty() == coefficients.empty())
    throw ConfigError("data", "give exactly one of catalog and coefficients");
  if (!(tol_flux > 0.0)) throw ConfigError("tolerances.flux", "must be positive");
  if (!(tol_period > 0.0)) throw ConfigError("tolerances.period", "must be positive");
  if (!(tol_conf > 0.0)) throw ConfigError("tolerances.conf", "must be positive");
  if (t_samples < 2) throw ConfigError("run.t_samples", "must be at least 2");
  if (out.empty()) throw ConfigError("run.out", "must not be empty");
  for (double t : obj_t)
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("run.obj_t", "values must lie in [0, 1]");
  if (obj_n_r < 2 || obj_n_theta < 3) throw ConfigError("run.obj_grid", "grid too coarse");
  if (verify_n_r < 4 || verify_n_theta < 8) throw ConfigError("run.verify_grid", "grid too coarse");
  if (need_data && driver == Driver::PrescribeFlux && target.empty())
    throw ConfigError("driver.target", "prescribe_flux needs one target per generator");
  if (driver == Driver::CompleteStep && !(delta > 0.0)) throw ConfigError("driver.delta", "must be positive");
  if (domain) {
    if (!(domain->outer.radius > 0.0)) throw ConfigError("domain.outer", "radius must be positive");
    try {
      CircularDomain check(domain->outer, domain->holes);
    } catch (const std::exception& e) {
      throw ConfigError("domain.holes", e.what());
    }
  }
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(strip_comments(text));
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    const auto it = kKeys.find(section);
    if (it == kKeys.end()) throw ConfigError(section, "unknown section");
    for (const auto& kv : body)
      if (!it->second.count(kv.first)) throw ConfigError(section + "." + kv.first, "unknown key");
  }
  const auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return *v;
    return std::nullopt;
  };

  RunConfig c;
  if (auto outer = get("domain.outer")) {
    const auto v = groups("domain.outer", *outer, 3);
    if (v.size() != 1) throw ConfigError("domain.outer", "expected cx cy radius");
    CircularDomain d;
    d.outer = disk(v[0]);
    if (auto holes = get("domain.holes"))
      for (const auto& h : groups("domain.holes", *holes, 3)) d.holes.push_back(disk(h));
    c.domain = d;
  } else if (get("domain.holes")) {
    throw ConfigError("domain.outer", "holes given without an outer disk");
  }
  if (auto v = get("data.catalog")) c.catalog = *v;
  if (auto v = get("data.coefficients")) c.coefficients = *v;
  if (auto v = get("driver.name")) {
    if (*v == "flux_to_zero")
      c.driver = Driver::FluxToZero;
    else if (*v == "prescribe_flux")
      c.driver = Driver::PrescribeFlux;
    else if (*v == "complete_step")
      c.driver = Driver::CompleteStep;
    else if (*v == "classify")
      c.driver = Driver::Classify;
    else
      throw ConfigError("driver.name", "unknown driver '" + *v + "'");
  }
  if (auto v = get("driver.target"))
    for (const auto& g : groups("driver.target", *v, 3)) c.target.emplace_back(g[0], g[1], g[2]);
  if (auto v = get("driver.delta")) c.delta = number("driver.delta", *v);
  if (auto v = get("driver.family")) {
    if (*v == "constant")
      c.constant_family = true;
    else if (*v == "flux_to_zero")
      c.constant_family = false;
    else
      throw ConfigError("driver.family", "expected constant or flux_to_zero");
  }
  if (auto v = get("tolerances.flux")) c.tol_flux = number("tolerances.flux", *v);
  if (auto v = get("tolerances.period")) c.tol_period = number("tolerances.period", *v);
  if (auto v = get("tolerances.conf")) c.tol_conf = number("tolerances.conf", *v);
  if (auto v = get("run.t_samples")) c.t_samples = integer("run.t_samples", *v);
  if (auto v = get("run.seed")) {
    const int s = integer("run.seed", *v);
    if (s < 0) throw ConfigError("run.seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (auto v = get("run.out")) c.out = *v;
  if (auto v = get("run.obj_t")) c.obj_t = numbers("run.obj_t", *v);
  if (auto v = get("run.obj_grid")) {
    const auto g = numbers("run.obj_grid", *v);
    if (g.size() != 2) throw ConfigError("run.obj_grid", "expected n_r n_theta");
    c.obj_n_r = static_cast<int>(g[0]);
    c.obj_n_theta = static_cast<int>(g[1]);
  }
  if (auto v = get("run.verify_grid")) {
    const auto g = numbers("run.verify_grid", *v);
    if (g.size() != 2) throw ConfigError("run.verify_grid", "expected n_r n_theta");
    c.verify_n_r = static_cast<int>(g[0]);
    c.verify_n_theta = static_cast<int>(g[1]);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str());
}

}  // namespace cmi::cli
