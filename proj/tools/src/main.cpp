#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cmi/cli/run.hpp"

int main(int argc, char** argv) {
  using namespace cmi::cli;
  CLI::App app{"Isotopies of conformal minimal immersions of circular domains"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out;
  std::optional<int> t_samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_flux, tol_period;
  const auto common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", config, "key = value configuration file");
    if (need_config) opt->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--t-samples", t_samples, "number of t-samples");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--tol-flux", tol_flux, "flux tolerance");
    sub->add_option("--tol-period", tol_period, "real period tolerance");
  };
  CLI::App* run_cmd = app.add_subcommand("run", "run the configured driver and write all artifacts");
  CLI::App* verify_cmd = app.add_subcommand("verify", "recheck the coefficients of a previous run");
  CLI::App* classify_cmd = app.add_subcommand("classify", "print the pi1 class of each generator");
  CLI::App* export_cmd = app.add_subcommand("export", "write OBJ meshes of a previous run");
  common(run_cmd, true);
  common(verify_cmd, false);
  common(classify_cmd, true);
  common(export_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig c;
  try {
    if (!config.empty()) c = load_config(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (out) c.out = *out;
  if (t_samples) c.t_samples = *t_samples;
  if (seed) c.seed = *seed;
  if (tol_flux) c.tol_flux = *tol_flux;
  if (tol_period) c.tol_period = *tol_period;

  if (*run_cmd) return run(c, std::cout);
  if (*classify_cmd) {
    c.driver = Driver::Classify;
    return run(c, std::cout);
  }
  if (*verify_cmd) return verify_saved(c, std::cout);
  return export_meshes(c, std::cout);
}
