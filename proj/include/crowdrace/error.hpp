#pragma once

#include <stdexcept>
#include <string>

namespace crowdrace {

// Invalid configuration or mismatched inputs, raised before any simulation work.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation (non-positive rate, etc).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Caller broke an ordering or shape contract (time regression, dimension mismatch).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Data cannot support the requested estimate.
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crowdrace
