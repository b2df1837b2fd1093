#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cite {

enum class ErrorCode {
  kZeroRow,
  kDimMismatch,
  kShapeMismatch,
  kNonPositiveTemperature,
  kInvalidDistribution,
  kQZeroWherePPositive,
  kNonFiniteLoss,
  kNonFiniteValue,
  kInvalidArgument,
  kUnknownToken,
  kMissingClassPrompt,
  kDuplicateClassPrompt,
  kKOutOfRange,
  kLabelOutOfRange,
  kBatchTooSmall,
  kInsufficientExamples,
  kIo,
  kFormatVersionMismatch,
  kChecksumMismatch,
  kArchitectureMismatch,
  kEmptyClassSet,
  kNegativeInput,
  kSpecDatasetMismatch,
  kInvalidSpec,
  kDegenerateSplit,
  kSchema,
  kConfig,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the training loop when a step produces a NaN/Inf loss.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::size_t step, const std::string& what)
      : Error(ErrorCode::kNonFiniteLoss, "step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace cite
