#pragma once

#include <stdexcept>
#include <string>

namespace unip {

// Dataset files missing, truncated, or malformed. CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value detected in a public result. CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller violated a precondition (bad shape, label out of range, invalid
// config). CLI maps this to exit code 1.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace unip
