#pragma once

#include <stdexcept>
#include <string>

namespace dualdiv {

/// Inputs violate a model or policy constraint.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a function (negative θ, n <= 0, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to converge or produced an out-of-range value.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The requested operation does not support this model class.
class UnsupportedModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace dualdiv
