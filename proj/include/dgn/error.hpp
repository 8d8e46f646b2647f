#pragma once

#include <stdexcept>
#include <string>

namespace dgn {

// Base class for all library failures. Subclasses map onto CLI exit codes:
// ParseError/FormatError/IoError/LookupError -> 2, ConfigError -> 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension mismatch; message names both operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed textual input (dataset JSON, embedding file). Carries the
// offending line/element index in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Malformed binary input (checkpoint, graph cache).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Inconsistent run configuration (dimension mismatch, invalid hyperparameter).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Requested entity does not exist (e.g. unknown example id).
class LookupError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered where finiteness is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A node/question has no in-vocabulary tokens and the caller did not opt in
// to a degenerate representation.
class EmptyRepresentationError : public Error {
 public:
  using Error::Error;
};

// An induced graph with no nodes was handed to the model.
class EmptyGraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace dgn
