#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace snsld {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class SpectrumViolation : public Error {
 public:
  using Error::Error;
};

class CancellationViolation : public Error {
 public:
  using Error::Error;
};

class NoiseViolation : public Error {
 public:
  using Error::Error;
};

class NotIrreducible : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when an integration step produces a non-finite coefficient.
class NonFiniteState : public Error {
 public:
  NonFiniteState(std::size_t step, const std::string& what)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace snsld
