#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace epinuts {

// A mathematical operation was asked for a value outside its domain.
class DomainError : public std::domain_error {
 public:
  DomainError(std::string operation, double value);
  DomainError(const std::string& message);

  const std::string& operation() const { return operation_; }
  double value() const { return value_; }

 private:
  std::string operation_;
  double value_ = 0.0;
};

// API misuse (wrong tape, bad configuration, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid model inputs: bad population, seeds exceeding population, etc.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace epinuts
