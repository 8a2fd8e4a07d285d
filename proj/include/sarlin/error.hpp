#pragma once

#include <stdexcept>
#include <string>

namespace sarlin {

// Violated precondition or inconsistent dimensions supplied by the caller.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Singular systems, rank-deficient instruments, non positive definite
// covariance matrices. The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, schemas and configuration documents.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

}  // namespace detail
}  // namespace sarlin
