#include "asymlab/error.hpp"

namespace asymlab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::UnsupportedOrder: return "unsupported order";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::SingularTransform: return "singular transform";
    case ErrorCode::SupportTooThin: return "support too thin";
    case ErrorCode::EnumerationOverflow: return "enumeration overflow";
    case ErrorCode::DegenerateDerivatives: return "degenerate derivatives";
    case ErrorCode::DomainError: return "domain error";
    case ErrorCode::ConfigError: return "config error";
    case ErrorCode::IoError: return "io error";
    case ErrorCode::Divergence: return "divergence";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace asymlab
