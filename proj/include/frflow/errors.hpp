#pragma once

#include <stdexcept>

namespace frflow {

/// Integration failures; the CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A density component fell below the positivity floor.
class BlowUpError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The dissipation watchdog fired: the step is too large for the trajectory.
class StepSizeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace frflow
