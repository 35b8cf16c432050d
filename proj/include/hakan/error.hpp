#pragma once

#include <stdexcept>
#include <string>

namespace hakan {

// Error classes. The CLI maps ConfigError, DataError and NumericError onto
// distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (non-scalar backward root,
// missing gradient, wrong layer mode, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Hahn (or other basis) parameters that make a recurrence coefficient undefined.
class BasisParameterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Internal shape contract of the forward pass was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace hakan
