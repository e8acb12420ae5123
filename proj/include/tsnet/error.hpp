#pragma once

#include <stdexcept>
#include <string>

namespace tsnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (JSONL line, config line).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a schema invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values in a forward pass or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operation not allowed in the current mode (e.g. future encoding at inference).
class ModeError : public Error {
 public:
  using Error::Error;
};

/// A character label outside its vocabulary.
class EncodingError : public Error {
 public:
  using Error::Error;
};

/// Every node of a graph was removed by the sparse mask.
class DegenerateMaskError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint and requested configuration disagree on a structural key.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsnet
