#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qpj {

/// Every failure the toolkit reports. The CLI maps these onto exit codes.
enum class ErrorKind {
  // configuration / input
  ParseError,
  EmptyPotential,
  InvalidArgument,
  ZeroLeadingCoefficient,
  // linear algebra
  DegenerateFrame,
  EigFailure,
  SingularSystem,
  GridTooCoarse,
  // dynamics
  InconclusiveDomination,
  FrameNotConverged,
  NotUniformlyHyperbolic,
  BlockNotInvertible,
  PairingViolation,
  // profile analysis
  SnapFailure,
  NonConvexProfile,
  AccelerationMismatch,
  BorderlineEnergy,
  // Green's functions
  SingularWronskian,
  WrongDecayCount,
  TruncationUnstable,
  WindingSlopeMismatch,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for errors caused by bad input rather than numerics.
bool is_config_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace qpj
