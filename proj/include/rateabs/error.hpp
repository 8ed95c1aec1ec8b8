#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rateabs {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch, non-square input or non-finite entries.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge or a linear system was singular.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied parameter violates a documented precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefiniteError : public NumericError {
 public:
  NotPositiveDefiniteError(const std::string& what, std::size_t failing_minor)
      : NumericError(what), failing_minor_(failing_minor) {}

  /// 1-based order of the leading principal minor where factorization failed.
  std::size_t failing_minor() const noexcept { return failing_minor_; }

 private:
  std::size_t failing_minor_;
};

/// dlyap has no stabilizing solution (spectral radius >= 1).
class NoStableSolutionError : public NumericError {
 public:
  using NumericError::NumericError;
};

class UnsupportedConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Enumeration or iteration would exceed a configured cap.
class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, double estimate)
      : Error(what), estimate_(estimate) {}

  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace rateabs
