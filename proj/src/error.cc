#include "soelabel/error.h"

namespace soelabel {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedLine: return "MALFORMED_LINE";
    case ErrorCode::kDuplicateId: return "DUPLICATE_ID";
    case ErrorCode::kEmptyGrid: return "EMPTY_GRID";
    case ErrorCode::kInvalidSpec: return "INVALID_SPEC";
    case ErrorCode::kKindMismatch: return "KIND_MISMATCH";
    case ErrorCode::kTransportError: return "TRANSPORT_ERROR";
    case ErrorCode::kTableIdMismatch: return "TABLE_ID_MISMATCH";
    case ErrorCode::kViewMismatch: return "VIEW_MISMATCH";
    case ErrorCode::kMissingHumanLabel: return "MISSING_HUMAN_LABEL";
    case ErrorCode::kSizeMismatch: return "SIZE_MISMATCH";
    case ErrorCode::kUnknownTable: return "UNKNOWN_TABLE";
    case ErrorCode::kBadThreshold: return "BAD_THRESHOLD";
    case ErrorCode::kMissingVerdict: return "MISSING_VERDICT";
    case ErrorCode::kKeyMismatch: return "KEY_MISMATCH";
    case ErrorCode::kEmptySet: return "EMPTY_SET";
    case ErrorCode::kInsufficientOverlap: return "INSUFFICIENT_OVERLAP";
    case ErrorCode::kSingleClass: return "SINGLE_CLASS";
    case ErrorCode::kDimMismatch: return "DIM_MISMATCH";
    case ErrorCode::kNotClaimHolder: return "NOT_CLAIM_HOLDER";
    case ErrorCode::kUnknownItem: return "UNKNOWN_ITEM";
    case ErrorCode::kNotEscalated: return "NOT_ESCALATED";
    case ErrorCode::kNotExpert: return "NOT_EXPERT";
    case ErrorCode::kNotRegistered: return "NOT_REGISTERED";
    case ErrorCode::kInvalidState: return "INVALID_STATE";
    case ErrorCode::kMissingDependency: return "MISSING_DEPENDENCY";
    case ErrorCode::kConfigError: return "CONFIG_ERROR";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN_ERROR";
}

}  // namespace soelabel
