#pragma once

#include <stdexcept>
#include <string>

namespace concordia {

// Input that violates a data contract: malformed files, shape mismatches,
// out-of-range indices. The CLI maps these to exit code 2.
class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The delta likelihood has no feasible stationary point (B = 0 / B = infinity
// boundary) and no smoothing rescue was permitted or it failed as well.
class DegenerateFitError : public std::runtime_error {
 public:
  DegenerateFitError(const std::string& what, std::string diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

// The goodness-of-fit test has no degrees of freedom for this K and R.
class SaturatedModelError : public DataError {
 public:
  using DataError::DataError;
};

// (R-1)X - 1 vanished in the delta-method variance formulas.
class SingularVarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bootstrap oracle with too many degenerate replicates to be trusted.
class UnreliableBootstrapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace concordia
