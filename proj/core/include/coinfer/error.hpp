#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coinfer {

enum class ErrorKind {
  NotSPD,
  NonConvergence,
  NonFinite,
  RankDeficient,
  InvalidArgument,
  LengthMismatch,
  TooFewSamples,
  IndexOutOfRange,
  DanglingEdge,
  SelectorOutOfRange,
  DuplicateNodeId,
  BoundaryMismatch,
  MissingRegisterEntry,
  MissingMeasurement,
  ParseError,
  InvalidParams,
  NonPositiveVariance,
  UnknownScenario,
  ConfigInvalid,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace coinfer
