#pragma once

#include <stdexcept>
#include <string>

namespace monocuboid {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed caller input: non-finite pixels, wrong arity, bad schema.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// The annotation set leaves more than the scale gauge unresolved.
class UnderConstrained : public Error {
 public:
  using Error::Error;
};

// No candidate solution places every observed point in front of the camera.
class CheiralityFailure : public Error {
 public:
  using Error::Error;
};

// An iterative numeric routine failed to converge where convergence is required.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace monocuboid
