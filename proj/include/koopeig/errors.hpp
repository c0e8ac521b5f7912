#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace koopeig {

enum class ErrorCode {
  blow_up,
  step_underflow,
  no_crossing,
  out_of_range,
  zero_field,
  grid_mismatch,
  not_in_domain,
  ambiguous_crossing,
  domain_error,
  empty_target,
  support_out_of_range,
  invalid_argument,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::blow_up: return "BlowUp";
    case ErrorCode::step_underflow: return "StepUnderflow";
    case ErrorCode::no_crossing: return "NoCrossing";
    case ErrorCode::out_of_range: return "OutOfRange";
    case ErrorCode::zero_field: return "ZeroField";
    case ErrorCode::grid_mismatch: return "GridMismatch";
    case ErrorCode::not_in_domain: return "NotInDomain";
    case ErrorCode::ambiguous_crossing: return "AmbiguousCrossing";
    case ErrorCode::domain_error: return "DomainError";
    case ErrorCode::empty_target: return "EmptyTarget";
    case ErrorCode::support_out_of_range: return "SupportOutOfRange";
    case ErrorCode::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace koopeig
