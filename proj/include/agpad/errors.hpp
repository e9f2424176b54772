#pragma once

#include <stdexcept>
#include <string>

namespace agpad {

// Tensor shapes do not satisfy an operation's contract.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A computation produced or encountered non-finite values.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file, manifest, image or checkpoint.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A run configuration failed validation.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace agpad
