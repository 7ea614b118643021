#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bhplab {

enum class ErrorKind {
  DegenerateDomain,
  DisconnectedGrid,
  EmptySample,
  NoInteriorAnchor,
  EllipticityViolation,
  NegativeKilling,
  NonConvergence,
  SingularSystem,
  StepRejection,
  ObstacleActive,
  WidthOverflow,
  DegenerateRegression,
  ScaleTooFine,
  ParseError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// True for failures of a numerical procedure as opposed to bad input.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bhplab
