#pragma once

#include <stdexcept>
#include <string>

namespace cumvol {

// Precondition violations on user input surface as std::invalid_argument.
// The two types below cover failures that happen while computing.

/// A numerical invariant was violated (mass defect, overflow, bad grid).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// A formula or procedure was asked for outside its validity domain
/// (for example a steady state with non-positive drift).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// An iteration did not reach its tolerance within the allowed steps.
class ConvergenceError : public NumericalError {
 public:
  explicit ConvergenceError(const std::string& what) : NumericalError(what) {}
};

}  // namespace cumvol
