#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cmi {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr cplx kI{0.0, 1.0};

enum class ErrorCode {
  InvalidArgument,
  NotOnQuadric,
  ZeroPoint,
  ZeroBase,
  UndersampledLoop,
  InvalidPair,
  NotImmersion,
  RootNotFound,
  SegmentOverlap,
  NonflatViolated,
  PerturbationFailed,
  EmptySegment,
  DegenerateLoop,
  DominationFailed,
  ThirdComponentVanishes,
  ContinuationStalled,
  LeftDomain,
  GaussMapVanishes,
  DegenerateDenominator,
  RealPeriodNonzero,
  UnknownName,
  NoClearance,
  ApproximationBudgetExceeded,
  VanishingOnDomain,
  FlatInput,
  NoBandFound,
  BandTooThin,
  GaussMapTooSmall,
  DisconnectedGraph,
  EstimateNotMet,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Default numerical tolerances shared across modules.
struct Tolerances {
  double null = 1e-10;
  double conf = 1e-10;
  double period = 1e-9;
  double flux = 1e-8;
  double runge = 1e-6;
};

}  // namespace cmi
