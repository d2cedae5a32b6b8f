#pragma once

#include <stdexcept>
#include <string>

namespace ftkoop {

/// Dimension or argument mismatch at an API boundary.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A decoded library mask selected no observables.
class EmptyLibraryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A simulated state (plant, filter or estimate) became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StackFullError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The unregularized flow was evaluated where its denominator vanishes.
class SingularFlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kernel matrix could not be factorized.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; message carries the offending line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ftkoop
