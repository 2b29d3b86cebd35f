#pragma once

#include <stdexcept>
#include <string>

namespace levelset {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A computation that requires a finite spectral moment was asked of a model
/// whose moment is infinite (e.g. refinement or Kac-Rice quantities on a
/// rough field).
class GateViolation : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to meet its contract (embedding not
/// nonnegative, singular covariance, all lines flagged, ...).
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace levelset
