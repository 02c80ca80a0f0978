#pragma once

#include <stdexcept>
#include <string>

namespace cttx {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Out-of-range or inconsistent model parameter (intensity, lag, rate matrix).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside a path's time window.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Comb-grid construction or history lookups that fall off the grid.
class GridError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on a value passed in (malformed pmf, length mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A user rate model returned a negative, non-finite or inconsistent rate.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A realized jump has positive rate under one measure and zero under the other.
class AbsoluteContinuityError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples to populate the requested contexts.
class EstimationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or schema-violating run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cttx
