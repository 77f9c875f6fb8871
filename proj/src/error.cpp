#include "fcto/error.hpp"

namespace fcto {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnreachable:
      return "UNREACHABLE";
    case ErrorCode::kSingular:
      return "SINGULAR";
    case ErrorCode::kNotPositiveDefinite:
      return "NOT_PD";
    case ErrorCode::kDiverged:
      return "DIVERGED";
    case ErrorCode::kInvalidSpec:
      return "INVALID_SPEC";
    case ErrorCode::kParse:
      return "PARSE";
    case ErrorCode::kIo:
      return "IO";
  }
  return "UNKNOWN";
}

}  // namespace fcto
