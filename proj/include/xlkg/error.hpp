#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xlkg {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kNotFound,
  kDuplicate,
  kIo,
  kNumeric,
  kPending,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code lets callers (the CLI in
// particular) render a stable machine-readable failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xlkg
