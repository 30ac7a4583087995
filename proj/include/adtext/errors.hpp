#pragma once

#include <stdexcept>
#include <string>

namespace adtext {

// Bad input data: malformed records, unknown labels, invalid ids.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyCorpusError : public InputError {
 public:
  using InputError::InputError;
};

// Invalid settings or violated preconditions on parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, divergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric whose denominator covers zero examples.
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adtext
