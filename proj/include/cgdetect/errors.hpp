#pragma once

#include <stdexcept>

namespace cgd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or argument mismatch inside the numeric core.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, or a numeric verification failed.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Manifest, image decode, checkpoint and other I/O failures.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or unknown name.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgd
