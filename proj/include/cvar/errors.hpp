#pragma once

#include <stdexcept>
#include <string>

namespace cvar {

/// Numerical failure: factorization breakdown, overflow, degenerate estimator.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix required to be symmetric positive definite was not.
/// pivot() is the 0-based index of the Cholesky pivot that failed,
/// or -1 when the failure is not pivot-specific (e.g. asymmetry).
class SpdError : public NumericError {
 public:
  SpdError(const std::string& what, int pivot = -1)
      : NumericError(what), pivot_(pivot) {}
  int pivot() const { return pivot_; }

 private:
  int pivot_;
};

/// Incompatible matrix/vector dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid parameter value (degrees of freedom, rank, lag, ...).
class ParamError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cvar
