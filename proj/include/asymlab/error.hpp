#pragma once

#include <stdexcept>
#include <string>

namespace asymlab {

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  UnsupportedOrder,
  NonFinite,
  SingularTransform,
  SupportTooThin,
  EnumerationOverflow,
  DegenerateDerivatives,
  DomainError,
  ConfigError,
  IoError,
  Divergence,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; the code distinguishes failure kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace asymlab
