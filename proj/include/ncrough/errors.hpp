#pragma once

#include <stdexcept>
#include <string>

namespace ncrough {

// Malformed request: bad shapes, mismatched conventions, invalid configuration.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Request exceeds a hard size budget. We refuse instead of silently degrading.
struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An iterative numeric routine could not reach its tolerance.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An iteration diverged; the message carries the gap history.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ncrough
