#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace novelseg {

enum class ErrorCode {
  io,                   // missing/unreadable/unwritable file
  decode,               // malformed file contents
  invalid_argument,     // caller broke a precondition
  validation,           // data violates a documented invariant
  degenerate_geometry,  // shape metric undefined (e.g. zero perimeter)
  empty_mask,
  missing_token,
  does_not_fit,
  localization_failed,
  config,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::decode: return "decode";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::validation: return "validation";
    case ErrorCode::degenerate_geometry: return "degenerate_geometry";
    case ErrorCode::empty_mask: return "empty_mask";
    case ErrorCode::missing_token: return "missing_token";
    case ErrorCode::does_not_fit: return "does_not_fit";
    case ErrorCode::localization_failed: return "localization_failed";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Returns a copy whose message is prefixed with "[stage] ".
  Error tagged(std::string_view stage) const {
    return Error(code_, "[" + std::string(stage) + "] " + what());
  }

 private:
  ErrorCode code_;
};

}  // namespace novelseg
