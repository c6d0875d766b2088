#pragma once

#include <stdexcept>
#include <string>

namespace wavedef {

/// Base class for every error this library raises deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes (broadcast failure, inner-dimension mismatch,
/// head divisibility, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Spatial geometry that cannot be realized (non-integral conv output,
/// odd image extents fed to the wavelet transform, slice out of range).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values (bad label index, bad attack spec, consumed tape).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed byte streams (IDX/CIFAR records, checkpoint container).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad run-configuration text (unknown key, unparsable value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wavedef
