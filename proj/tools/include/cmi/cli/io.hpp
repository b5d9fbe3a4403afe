#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmi/labyrinth.hpp"

namespace cmi::cli {

// Family of maps as written to coefficients.json. psi is empty for spinor families and holds one
// log-factor per t-sample after complete_step.
struct FamilyFile {
  std::string driver;
  CircularDomain domain;
  cplx basepoint = 1.0;
  Vec3 value = Vec3::Zero();
  std::vector<Vec3> target;
  std::vector<double> t;
  std::vector<SpinorMap> maps;
  std::vector<HoloFunction> psi;

  HoloForm form(size_t k) const;
  ImmersionFamily family() const;  // spinor families only
};

FamilyFile from_family(const ImmersionFamily& f, const std::string& driver);
FamilyFile from_completion(const CompletionResult& r, const ImmersionFamily& input);

void write_family(std::ostream& out, const FamilyFile& f);
// ConfigError on malformed files.
FamilyFile read_family(std::istream& in);
FamilyFile read_family_file(const std::string& path);

struct TraceRow {
  double t = 0.0;
  int generator = 0;
  CVec3 period = CVec3::Zero();  // int F dz over the generator; Im is the flux
  double flux_residual = 0.0;    // |flux - expected|
};

// t,generator,re_p1,re_p2,re_p3,im_p1,im_p2,im_p3,flux_norm,flux_residual,real_period_residual
void write_trace(std::ostream& out, const std::vector<TraceRow>& rows);

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;  // zero-based, counterclockwise in the z-plane
};

// u = value + Re int F dz on a polar grid about the outer center, integrated along rays from one
// point per ray; triangles touching a hole are dropped.
Mesh surface_mesh(const HoloForm& form, const CircularDomain& d, cplx basepoint, const Vec3& value, int n_r,
                  int n_theta, double tol_period);

// Wavefront OBJ with the t value in a comment header.
void write_obj(std::ostream& out, const Mesh& m, double t);

// labyrinth,end,bracket,N,set,vertex,x,y with each set traced as a closed polygon in the z-plane.
void write_labyrinths(std::ostream& out, const std::vector<Labyrinth>& labs, const std::vector<EndChart>& ends,
                      int arc_points = 32);

}  // namespace cmi::cli
