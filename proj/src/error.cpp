#include "bhplab/error.hpp"

namespace bhplab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateDomain: return "DegenerateDomain";
    case ErrorKind::DisconnectedGrid: return "DisconnectedGrid";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::NoInteriorAnchor: return "NoInteriorAnchor";
    case ErrorKind::EllipticityViolation: return "EllipticityViolation";
    case ErrorKind::NegativeKilling: return "NegativeKilling";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::StepRejection: return "StepRejection";
    case ErrorKind::ObstacleActive: return "ObstacleActive";
    case ErrorKind::WidthOverflow: return "WidthOverflow";
    case ErrorKind::DegenerateRegression: return "DegenerateRegression";
    case ErrorKind::ScaleTooFine: return "ScaleTooFine";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::ConfigError:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace bhplab
