#pragma once

#include <stdexcept>

namespace evo {

// Malformed arguments: empty sequences, length mismatches, bad config values.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ExploitationRangeTooLarge : public DomainError {
 public:
  using DomainError::DomainError;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API called in the wrong state, e.g. stepping a finished episode.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Constraint violated while its gradient vanishes; no recovery direction exists.
class CannotRecover : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evo
