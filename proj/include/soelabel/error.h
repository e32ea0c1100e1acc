#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace soelabel {

enum class ErrorCode {
  kMalformedLine,
  kDuplicateId,
  kEmptyGrid,
  kInvalidSpec,
  kKindMismatch,
  kTransportError,
  kTableIdMismatch,
  kViewMismatch,
  kMissingHumanLabel,
  kSizeMismatch,
  kUnknownTable,
  kBadThreshold,
  kMissingVerdict,
  kKeyMismatch,
  kEmptySet,
  kInsufficientOverlap,
  kSingleClass,
  kDimMismatch,
  kNotClaimHolder,
  kUnknownItem,
  kNotEscalated,
  kNotExpert,
  kNotRegistered,
  kInvalidState,
  kMissingDependency,
  kConfigError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above; the
// message holds the offending id or line number.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace soelabel
