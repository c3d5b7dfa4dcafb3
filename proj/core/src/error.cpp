#include "coinfer/error.hpp"

namespace coinfer {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DanglingEdge: return "DanglingEdge";
    case ErrorKind::SelectorOutOfRange: return "SelectorOutOfRange";
    case ErrorKind::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorKind::BoundaryMismatch: return "BoundaryMismatch";
    case ErrorKind::MissingRegisterEntry: return "MissingRegisterEntry";
    case ErrorKind::MissingMeasurement: return "MissingMeasurement";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace coinfer
