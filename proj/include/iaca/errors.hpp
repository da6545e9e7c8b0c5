#pragma once

#include <stdexcept>
#include <string>

namespace iaca {

/// Operand shapes are incompatible for the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument is outside the documented domain (temperature <= 0, fraction > 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A caller-side precondition on graph usage was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An object was used in a state that no longer permits the call.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iaca
