#pragma once

#include <stdexcept>
#include <string>

namespace slimnas {

// Error classes map one-to-one onto CLI exit codes:
//   ConfigError (and subclasses) -> 2, InfeasibleError -> 3, TrainingError -> 4.

// Invalid configuration, bad cross-field combination, malformed input file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed architecture string or log record.
struct ParseError : ConfigError {
  using ConfigError::ConfigError;
};

// File could not be read/written or has the wrong format/version.
struct IoError : ConfigError {
  using ConfigError::ConfigError;
};

// Constraint set admits no (further) architectures within the retry budget.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure during training (non-finite loss or weights).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace slimnas
