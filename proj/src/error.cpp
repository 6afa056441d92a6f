#include "xlkg/error.hpp"

namespace xlkg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kNumeric: return "numeric_error";
    case ErrorCode::kPending: return "pending";
  }
  return "unknown";
}

}  // namespace xlkg
