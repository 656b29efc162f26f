#pragma once

#include <stdexcept>
#include <string>

namespace mfeit {

enum class ErrorCode {
  kSeparationViolation,
  kOutOfDomain,
  kInvalidInput,
  kMeshFailure,
  kDegenerateContrast,
  kSolveFailure,
  kSegmentNotFound,
  kBadIndex,
  kSingularSystem,
  kTooFewFrequencies,
  kNumericalFailure,
  kDimensionMismatch,
  kRankDeficiency,
  kModelOrderFailure,
  kPoleCollision,
  kPoleEvaluation,
  kIllConditioned,
  kIo,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (tests, the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSeparationViolation: return "SeparationViolation";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kMeshFailure: return "MeshFailure";
    case ErrorCode::kDegenerateContrast: return "DegenerateContrast";
    case ErrorCode::kSolveFailure: return "SolveFailure";
    case ErrorCode::kSegmentNotFound: return "SegmentNotFound";
    case ErrorCode::kBadIndex: return "BadIndex";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kTooFewFrequencies: return "TooFewFrequencies";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kRankDeficiency: return "RankDeficiency";
    case ErrorCode::kModelOrderFailure: return "ModelOrderFailure";
    case ErrorCode::kPoleCollision: return "PoleCollision";
    case ErrorCode::kPoleEvaluation: return "PoleEvaluation";
    case ErrorCode::kIllConditioned: return "IllConditioned";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace mfeit
