#pragma once

#include <stdexcept>
#include <string>

namespace adsq {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file magic, header or payload values.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input whose content violates an invariant (NaN, empty label row).
class DataError : public Error {
 public:
  using Error::Error;
};

// Payload shorter than the header promises.
class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during optimisation.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace adsq
