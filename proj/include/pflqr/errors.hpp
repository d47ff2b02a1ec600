#pragma once

#include <stdexcept>
#include <string>

namespace pflqr {

// Base class for every error raised by the library. Callers that only care
// about "something was invalid" can catch this; the CLI maps it to exit code 2
// when it is a usage error and 1 otherwise.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input or configuration that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidBasisSpec : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class PointOutOfDomain : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DegreeTooLow : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class GridTooShort : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class BadTrimSet : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class BadKappa : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InvalidLevel : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ZeroTrueNorm : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Numerical failures that are not the caller's fault.
class NonFiniteObjective : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pflqr
