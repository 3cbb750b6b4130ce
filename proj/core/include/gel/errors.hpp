#pragma once

#include <stdexcept>
#include <string>

namespace gel {

// Mismatched vector lengths or parameter shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the valid mathematical domain (negative std, zero classes, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid experiment or training configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A client was asked to do something the training protocol forbids,
// e.g. guessing without ever having computed a gradient.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Accuracy or loss requested over an empty sample set.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be read, written or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gel
