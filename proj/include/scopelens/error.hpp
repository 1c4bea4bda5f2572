#pragma once

#include <stdexcept>
#include <string>

namespace scopelens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bytes in an input file (PPM, PGM, weight file, JSON document).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A structurally valid document that violates a semantic rule.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor or blob dimensions that disagree with what the network expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on a layer that does not support it (e.g. RF past fc).
class UnsupportedLayerError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace scopelens
