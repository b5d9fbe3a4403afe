#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmi/domain.hpp"

namespace cmi::cli {

// Usage or configuration error; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Driver { FluxToZero, PrescribeFlux, CompleteStep, Classify };

const char* to_string(Driver d);

struct RunConfig {
  std::optional<CircularDomain> domain;  // must agree with the data when given
  std::string catalog;                   // one of catalog / coefficients
  std::string coefficients;
  Driver driver = Driver::FluxToZero;
  std::vector<Vec3> target;       // prescribe_flux, one per generator
  double delta = 0.5;             // complete_step
  bool constant_family = true;    // complete_step: constant family, else flux_to_zero first
  double tol_flux = 1e-8;
  double tol_period = 1e-9;
  double tol_conf = 1e-10;
  int t_samples = 64;
  std::uint64_t seed = 1;
  std::string out = "cmi_out";
  std::vector<double> obj_t;      // OBJ meshes at these t
  int obj_n_r = 24;
  int obj_n_theta = 96;
  int verify_n_r = 64;
  int verify_n_theta = 256;

  // ConfigError naming the first offending field. Without need_data the data and driver fields
  // are not checked.
  void validate(bool need_data = true) const;
};

// Flat key = value text with [section] headers; '#' and ';' start comments.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace cmi::cli
