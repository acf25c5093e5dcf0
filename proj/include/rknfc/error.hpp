#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rknfc {

/// Raised when an argument violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A force function was evaluated outside its domain (e.g. r = 0 for Kepler).
class ForceDomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A matrix that must be factorized turned out to be (numerically) singular.
class SingularMatrixError : public std::runtime_error {
public:
  SingularMatrixError(const std::string& what, double step_size)
      : std::runtime_error(what + " (h = " + std::to_string(step_size) + ")"),
        step_size_(step_size) {}

  double step_size() const noexcept { return step_size_; }

private:
  double step_size_;
};

/// An integration was aborted because a step did not converge.
class NonConvergenceError : public std::runtime_error {
public:
  NonConvergenceError(const std::string& what, std::size_t step_index)
      : std::runtime_error(what + " at step " + std::to_string(step_index)),
        step_index_(step_index) {}

  std::size_t step_index() const noexcept { return step_index_; }

private:
  std::size_t step_index_;
};

}  // namespace rknfc
