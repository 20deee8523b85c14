#pragma once

#include <stdexcept>
#include <string>

namespace tutor {

/// Bad or inconsistent configuration (files, schemas, parameter ranges).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or contract-violating input data (trajectory files, logs).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API misuse: mismatched shapes, stepping finished episodes, and the like.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values or numerically degenerate states.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tutor
