#pragma once

#include <stdexcept>
#include <string>

namespace reside {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition: bad shape, invalid flag value, infeasible budget.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or version-mismatched on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent run configuration (bank/architecture mismatch, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data residual hit zero: the fit is exact and there is nothing to adapt.
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

}  // namespace reside
