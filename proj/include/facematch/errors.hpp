#pragma once

#include <stdexcept>
#include <string>

namespace facematch {

// Base for every error raised by the engine. `code()` is a stable,
// machine-readable identifier (e.g. "InvalidValue", "EmptyStore") that the
// HTTP layer and the CLI surface verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message);

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace facematch
