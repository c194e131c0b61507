#pragma once

#include <stdexcept>
#include <string>

namespace archer {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions between matrices, networks, caches or transitions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached an optimizer or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Sampling requested from a buffer that holds no data yet.
class NotReadyError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace archer
