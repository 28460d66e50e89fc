#pragma once

#include <stdexcept>
#include <string>

namespace hevs {

// Failure categories surfaced by the core. The C API maps each one onto a
// stable status code, so new entries go at the end.
enum class ErrorCode {
  Format = 1,
  Range,
  Truncated,
  Shape,
  Bounds,
  Config,
  Io,
  Pairing,
  KeyMismatch,
  Numeric,
  Precondition,
  EmptyReport,
};

const char* error_code_name(ErrorCode code) noexcept;

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

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace hevs
