#pragma once

#include <stdexcept>
#include <string>

namespace mdn {

// Base of every error raised by the library. Each subclass maps to a distinct
// CLI exit code (see tools/mdn.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A quantized symbol fell outside the coder alphabet.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated bitstream / checkpoint / manifest.
class FormatError : public Error {
 public:
  using Error::Error;
};

class HashMismatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mdn
