#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace swingid {

enum class ErrorCode {
  parse,
  invalid_case,
  precondition,
  step_underflow,
  window_overrun,
  double_noise,
  rank_deficient,
  zero_regressor,
  unphysical,
  unknown_candidate,
  all_zeroed,
  alignment,
  backend_unavailable,
  io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI and the per-bus status fields can report it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace swingid
