#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qml {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `position()` is the 0-based byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Evaluation outside the domain of an expression (division by zero,
/// sqrt/log of a non-positive number, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative method (Newton, power iteration, step control) gave up.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A grid does not resolve the oscillation it is asked to carry.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// A computation would exceed its configured memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace qml
