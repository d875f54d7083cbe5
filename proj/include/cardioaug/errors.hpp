// errors.hpp - exception types surfaced by the command-line layer.

#pragma once

#include <stdexcept>
#include <string>

namespace cardioaug {

/// Malformed manifest/config or violated dataset invariant (exit code 1).
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// File could not be read, decoded or written.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitPartialFailure = 2, kExitCheckFailure = 3 };

} // namespace cardioaug
