#include "swingid/error.hpp"

namespace swingid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return "parse";
    case ErrorCode::invalid_case: return "invalid_case";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::step_underflow: return "step_underflow";
    case ErrorCode::window_overrun: return "window_overrun";
    case ErrorCode::double_noise: return "double_noise";
    case ErrorCode::rank_deficient: return "rank_deficient";
    case ErrorCode::zero_regressor: return "zero_regressor";
    case ErrorCode::unphysical: return "unphysical";
    case ErrorCode::unknown_candidate: return "unknown_candidate";
    case ErrorCode::all_zeroed: return "all_zeroed";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::backend_unavailable: return "backend_unavailable";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace swingid
