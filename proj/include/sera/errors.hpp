#pragma once

#include <stdexcept>
#include <string>

namespace sera {

// A caller broke an operation's documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An input lies outside the domain of the model (bad token, vocab mismatch).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Mutually inconsistent hyperparameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Work ran to completion but produced nothing usable.
class EmptyResultError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sera
