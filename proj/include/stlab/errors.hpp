#pragma once

#include <stdexcept>
#include <string>

namespace stlab {

/// Base of every error raised by the library. Carries a stable short code
/// that the CLI maps onto exit statuses and artifact names.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define STLAB_DECLARE_ERROR(Name)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name, what) {}   \
  }

STLAB_DECLARE_ERROR(NonIntegrableTail);
STLAB_DECLARE_ERROR(OutOfRange);
STLAB_DECLARE_ERROR(DivisionNearZero);
STLAB_DECLARE_ERROR(StepUnderflow);
STLAB_DECLARE_ERROR(PatchMismatch);
STLAB_DECLARE_ERROR(QuadratureFailure);
STLAB_DECLARE_ERROR(LinearSolveFailure);
STLAB_DECLARE_ERROR(ReactionOverflow);
STLAB_DECLARE_ERROR(TimeMeshMismatch);
STLAB_DECLARE_ERROR(OrderingViolation);
STLAB_DECLARE_ERROR(NonMonotoneScan);
STLAB_DECLARE_ERROR(ConfigError);

#undef STLAB_DECLARE_ERROR

}  // namespace stlab
