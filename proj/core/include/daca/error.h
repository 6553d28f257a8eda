#pragma once

#include <stdexcept>
#include <string>

namespace daca {

// Failure categories surfaced by the library. The CLI maps each one to a
// distinct process exit status.
enum class ErrorCode {
  kInput,         // malformed argument or data shape
  kDomain,        // argument outside the mathematical domain (tau <= 0, ...)
  kAllDisagree,   // agreement mask is false on every record
  kMissingLabel,  // supervised objective or metric on unlabeled data
  kParse,         // malformed input file
  kConfig,        // infeasible or malformed configuration
  kIo,            // filesystem failure
};

const char* ToString(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& message);

}  // namespace daca
