#pragma once

#include <stdexcept>
#include <string>

namespace hamlearn {

// Bad configuration value or unsupported option.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Site index or term outside the lattice.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Malformed or inconsistent measurement data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Eigensolver failure, non-Hermitian input, large imaginary residuals, ...
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model probability collapsed to zero where data has support.
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

// An iterative method kept increasing its objective; the step size is too large.
class StepSizeError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Patch tiling impossible for the requested size and margin.
class PlanningError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Hilbert-space dimension beyond what dense routines accept.
class DimensionError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Dataset / basis / config file could not be read.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hamlearn
