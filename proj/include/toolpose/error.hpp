#pragma once

#include <stdexcept>
#include <string>

namespace toolpose {

enum class ErrorKind {
  DegenerateRotation6D,
  InvalidRotation,
  BackfacingRay,
  NonPositiveDepth,
  PointBehindCamera,
  ParseError,
  DegenerateMesh,
  BBoxMismatch,
  EmptyRender,
  TooFewCorrespondences,
  DegenerateConfiguration,
  NonFiniteResidual,
  NoConsensus,
  EmptyMask,
  ShapeMismatch,
  NoAnnotations,
  EmptySequence,
  ConfigError,
  IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace toolpose
