#pragma once

#include <stdexcept>
#include <string>

namespace lgts {

// Bad arguments, malformed configs or input files. Mapped to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure (non-finite loss, factorization breakdown, singular solve).
// Mapped to CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Cholesky breakdown. pivot() is the index of the first non-positive pivot.
class CholeskyError : public NumericError {
 public:
  CholeskyError(const std::string& what, int pivot)
      : NumericError(what), pivot_(pivot) {}
  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

}  // namespace lgts
