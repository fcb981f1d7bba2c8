#pragma once

#include <stdexcept>
#include <string>

namespace geonet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point does not lie on the model (off-sphere norm, torus coordinate outside the box).
class CoordinateError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, density, noise or mask configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Inputs that do not belong together (sample set drawn from another model, mismatched tables).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A derived tuning parameter violates its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the 1-based line number when one applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Attempt to read the value of a masked (unobserved) pair.
class MaskedReadError : public Error {
 public:
  using Error::Error;
};

class UnsupportedNoiseError : public Error {
 public:
  using Error::Error;
};

/// Chart pair outside the admissible range of the refinement recursion.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A refinement quantity was requested before the values it depends on were staged.
class StagingError : public Error {
 public:
  using Error::Error;
};

class BasisFailure : public Error {
 public:
  using Error::Error;
};

/// Simplex grid would exceed the configured size limit.
class TooFineError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace geonet
