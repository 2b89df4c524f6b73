#include "toolpose/error.hpp"

namespace toolpose {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateRotation6D: return "DegenerateRotation6D";
    case ErrorKind::InvalidRotation: return "InvalidRotation";
    case ErrorKind::BackfacingRay: return "BackfacingRay";
    case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorKind::PointBehindCamera: return "PointBehindCamera";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DegenerateMesh: return "DegenerateMesh";
    case ErrorKind::BBoxMismatch: return "BBoxMismatch";
    case ErrorKind::EmptyRender: return "EmptyRender";
    case ErrorKind::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::NonFiniteResidual: return "NonFiniteResidual";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NoAnnotations: return "NoAnnotations";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace toolpose
