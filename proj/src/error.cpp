#include "qpj/error.hpp"

namespace qpj {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyPotential: return "EmptyPotential";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ZeroLeadingCoefficient: return "ZeroLeadingCoefficient";
    case ErrorKind::DegenerateFrame: return "DegenerateFrame";
    case ErrorKind::EigFailure: return "EigFailure";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::InconclusiveDomination: return "InconclusiveDomination";
    case ErrorKind::FrameNotConverged: return "FrameNotConverged";
    case ErrorKind::NotUniformlyHyperbolic: return "NotUniformlyHyperbolic";
    case ErrorKind::BlockNotInvertible: return "BlockNotInvertible";
    case ErrorKind::PairingViolation: return "PairingViolation";
    case ErrorKind::SnapFailure: return "SnapFailure";
    case ErrorKind::NonConvexProfile: return "NonConvexProfile";
    case ErrorKind::AccelerationMismatch: return "AccelerationMismatch";
    case ErrorKind::BorderlineEnergy: return "BorderlineEnergy";
    case ErrorKind::SingularWronskian: return "SingularWronskian";
    case ErrorKind::WrongDecayCount: return "WrongDecayCount";
    case ErrorKind::TruncationUnstable: return "TruncationUnstable";
    case ErrorKind::WindingSlopeMismatch: return "WindingSlopeMismatch";
  }
  return "Unknown";
}

bool is_config_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::EmptyPotential:
    case ErrorKind::InvalidArgument:
    case ErrorKind::ZeroLeadingCoefficient:
      return true;
    default:
      return false;
  }
}

}  // namespace qpj
