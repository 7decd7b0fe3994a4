#pragma once

#include <stdexcept>
#include <string>

namespace ngmix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (x <= 0, t outside a grid, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Result not representable in double precision.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Invalid distribution or model parameter combination.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to converge or hit a singular system.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, double achieved = 0.0)
      : Error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

class FactorizationError : public NumericalError {
 public:
  FactorizationError(const std::string& what, int pivot)
      : NumericalError(what), pivot_(pivot) {}
  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

class UnsupportedFamilyError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ngmix
