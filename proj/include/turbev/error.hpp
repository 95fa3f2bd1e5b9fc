#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace turbev {

enum class ErrorCode {
  OutOfBounds,
  BadPolarity,
  BadParam,
  InvalidValue,
  GeometryMismatch,
  LengthMismatch,
  TrajectoryOutOfBounds,
  TooFewFrames,
  TooSmall,
  BadSpan,
  DegenerateVariance,
  WindowOutOfSpan,
  BadMagic,
  Corrupt,
  Unsorted,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::BadPolarity: return "BadPolarity";
    case ErrorCode::BadParam: return "BadParam";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TrajectoryOutOfBounds: return "TrajectoryOutOfBounds";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::BadSpan: return "BadSpan";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::WindowOutOfSpan: return "WindowOutOfSpan";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::Corrupt: return "Corrupt";
    case ErrorCode::Unsorted: return "Unsorted";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this exception; `code()`
/// identifies the failure class, `what()` carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures caused by the file system or malformed files.
  bool is_io() const noexcept {
    return code_ == ErrorCode::Io || code_ == ErrorCode::BadMagic ||
           code_ == ErrorCode::Corrupt || code_ == ErrorCode::Unsorted;
  }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& detail) {
  if (!cond) throw Error(code, detail);
}

}  // namespace detail
}  // namespace turbev
