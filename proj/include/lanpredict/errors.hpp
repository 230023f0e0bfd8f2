#pragma once

#include <stdexcept>
#include <string>

namespace lanpredict {

/// Raised when θ=(α,β) leaves the admissible set α > |β|.
class ParameterDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for invalid time grids (non-positive steps, too few nodes, bad sub-path lengths).
class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a parameter box is not contained in the admissible set.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an estimator fails on a given path (no convergence, zero channel energy).
class EstimationError : public std::runtime_error {
 public:
  EstimationError(const std::string& what, int iterations = 0)
      : std::runtime_error(what), iterations_(iterations) {}

  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

/// Raised for malformed experiment configurations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace lanpredict
