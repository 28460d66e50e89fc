#include "hevs/error.hpp"

namespace hevs {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Format: return "format";
    case ErrorCode::Range: return "range";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Bounds: return "bounds";
    case ErrorCode::Config: return "config";
    case ErrorCode::Io: return "io";
    case ErrorCode::Pairing: return "pairing";
    case ErrorCode::KeyMismatch: return "key-mismatch";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::EmptyReport: return "empty-report";
  }
  return "unknown";
}

}  // namespace hevs
