#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlos {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
  invalid_argument = 2,
  domain = 3,
  invalid_plane = 4,
  degenerate = 5,
  out_of_range = 6,
  histogram_overflow = 7,
  ambiguous_peak = 8,
  low_signal = 9,
  normalization = 10,
  step_failure = 11,
  coverage = 12,
  empty_box = 13,
  io = 14,
  format = 15,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::domain: return "domain";
    case ErrorCode::invalid_plane: return "invalid_plane";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::histogram_overflow: return "histogram_overflow";
    case ErrorCode::ambiguous_peak: return "ambiguous_peak";
    case ErrorCode::low_signal: return "low_signal";
    case ErrorCode::normalization: return "normalization";
    case ErrorCode::step_failure: return "step_failure";
    case ErrorCode::coverage: return "coverage";
    case ErrorCode::empty_box: return "empty_box";
    case ErrorCode::io: return "io";
    case ErrorCode::format: return "format";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace nlos
