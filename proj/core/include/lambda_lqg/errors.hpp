#pragma once

#include <stdexcept>
#include <string>

namespace lambda_lqg {

enum class ErrorCode {
  kDimensionMismatch,
  kDomainMismatch,
  kInvalidArgument,
  kUnsupportedRepresentation,
  kNoStabilizingSolution,
  kIllPosed,
  kUnstable,
  kSizeLimit,
  kSynthesisFailure,
  kConfig,
};

const char* to_string(ErrorCode code);

/// Base exception for every failure raised by the toolkit. The code lets
/// callers (the CLI in particular) map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace lambda_lqg
