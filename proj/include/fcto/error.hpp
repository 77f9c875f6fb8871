#pragma once

#include <stdexcept>
#include <string>

namespace fcto {

enum class ErrorCode {
  kUnreachable,
  kSingular,
  kNotPositiveDefinite,
  kDiverged,
  kInvalidSpec,
  kParse,
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fcto
