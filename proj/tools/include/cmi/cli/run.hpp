#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cmi/cli/config.hpp"
#include "cmi/cli/io.hpp"

namespace cmi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitVerification = 2;

// Module owning an error code, for messages.
const char* module_of(ErrorCode code);

struct ClassifyResult {
  std::vector<int> classes;  // per generator
  int n_samples = 0;
  double phase = 0.0;
};

// pi1 class of F dz on each generator, sampled from a seeded start phase and sample count.
ClassifyResult classify_generators(const HoloForm& form, const CircularDomain& d, std::uint64_t seed);

// Executes the configured driver and writes the artifacts under c.out.
int run(const RunConfig& c, std::ostream& log);
// Recomputes the residuals of <out>/coefficients.json.
int verify_saved(const RunConfig& c, std::ostream& log);
// OBJ meshes of <out>/coefficients.json at c.obj_t (0 and 1 when empty).
int export_meshes(const RunConfig& c, std::ostream& log);

}  // namespace cmi::cli
