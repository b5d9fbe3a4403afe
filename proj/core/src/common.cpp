#include "cmi/common.hpp"

namespace cmi {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotOnQuadric: return "NotOnQuadric";
    case ErrorCode::ZeroPoint: return "ZeroPoint";
    case ErrorCode::ZeroBase: return "ZeroBase";
    case ErrorCode::UndersampledLoop: return "UndersampledLoop";
    case ErrorCode::InvalidPair: return "InvalidPair";
    case ErrorCode::NotImmersion: return "NotImmersion";
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::SegmentOverlap: return "SegmentOverlap";
    case ErrorCode::NonflatViolated: return "NonflatViolated";
    case ErrorCode::PerturbationFailed: return "PerturbationFailed";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::DegenerateLoop: return "DegenerateLoop";
    case ErrorCode::DominationFailed: return "DominationFailed";
    case ErrorCode::ThirdComponentVanishes: return "ThirdComponentVanishes";
    case ErrorCode::ContinuationStalled: return "ContinuationStalled";
    case ErrorCode::LeftDomain: return "LeftDomain";
    case ErrorCode::GaussMapVanishes: return "GaussMapVanishes";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::RealPeriodNonzero: return "RealPeriodNonzero";
    case ErrorCode::UnknownName: return "UnknownName";
    case ErrorCode::NoClearance: return "NoClearance";
    case ErrorCode::ApproximationBudgetExceeded: return "ApproximationBudgetExceeded";
    case ErrorCode::VanishingOnDomain: return "VanishingOnDomain";
    case ErrorCode::FlatInput: return "FlatInput";
    case ErrorCode::NoBandFound: return "NoBandFound";
    case ErrorCode::BandTooThin: return "BandTooThin";
    case ErrorCode::GaussMapTooSmall: return "GaussMapTooSmall";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::EstimateNotMet: return "EstimateNotMet";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace cmi
