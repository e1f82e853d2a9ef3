#pragma once

#include <stdexcept>
#include <string>

namespace ballgibbs {

/// Raised when a numerical procedure fails to meet its own accuracy gate
/// (root-finding, quadrature residuals, integrator drift).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when inputs are inconsistent with one another (sizes, bases, models).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ballgibbs
