#include "cite/error.hpp"

namespace cite {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroRow: return "ZeroRowError";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::kInvalidDistribution: return "InvalidDistribution";
    case ErrorCode::kQZeroWherePPositive: return "QZeroWherePPositive";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnknownToken: return "UnknownToken";
    case ErrorCode::kMissingClassPrompt: return "MissingClassPrompt";
    case ErrorCode::kDuplicateClassPrompt: return "DuplicateClassPrompt";
    case ErrorCode::kKOutOfRange: return "KOutOfRange";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kBatchTooSmall: return "BatchTooSmall";
    case ErrorCode::kInsufficientExamples: return "InsufficientExamples";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::kEmptyClassSet: return "EmptyClassSet";
    case ErrorCode::kNegativeInput: return "NegativeInput";
    case ErrorCode::kSpecDatasetMismatch: return "SpecDatasetMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kDegenerateSplit: return "DegenerateSplit";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kConfig: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace cite
