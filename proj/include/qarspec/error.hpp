#pragma once

#include <stdexcept>
#include <string>

namespace qarspec {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration (out-of-range k, bad tau grid, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Period labels of two inputs do not line up.
class AlignmentError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Malformed or unusable input data (missing cells, constant series).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to converge or produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Rank-deficient design or Gram matrix.
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace qarspec
