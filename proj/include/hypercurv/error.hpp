#pragma once

#include <stdexcept>
#include <string>

namespace hypercurv {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (wrong shape, non-scalar root, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Unknown primitive, bad config value, schema mismatch.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateDirectionError : public Error {
 public:
  using Error::Error;
};

/// Möbius denominator vanished.
class NearSingularError : public Error {
 public:
  using Error::Error;
};

/// A point reached the boundary of the Poincaré ball.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

/// A bound constant whose denominator vanishes for the given arguments.
class DegenerateContextError : public Error {
 public:
  using Error::Error;
};

}  // namespace hypercurv
