#pragma once

#include <stdexcept>
#include <string>

namespace drift {

/// Bad arguments, malformed model files, violated preconditions.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration blew up, an iteration did not converge, an invariant drifted.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested point lies outside the domain on which an object is defined.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quadrature could not reach the requested tolerance; carries the best estimate.
class AccuracyError : public NumericalError {
 public:
  AccuracyError(const std::string& what, double best_value, double best_error)
      : NumericalError(what), best_value_(best_value), best_error_(best_error) {}

  double best_value() const { return best_value_; }
  double best_error() const { return best_error_; }

 private:
  double best_value_;
  double best_error_;
};

}  // namespace drift
