#pragma once

#include <stdexcept>
#include <string>

namespace graphmem {

// Base class for all library errors. Subclasses map onto the CLI exit codes:
// config/contract -> 1, format/data -> 2, numeric/convergence -> 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid run or model configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset file; message carries file name and line where known.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input with inconsistent content.
class DataError : public Error {
 public:
  using Error::Error;
};

// Iterative solver failed to reach tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace graphmem
