#pragma once

#include <stdexcept>
#include <string>

namespace satlab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or batch dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Unknown names, missing taps, invalid hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long batch_index)
      : Error(what + " (batch index " + std::to_string(batch_index) + ")"),
        batch_index_(batch_index) {}

  long batch_index() const noexcept { return batch_index_; }

 private:
  long batch_index_;
};

/// Caller violated a documented precondition (e.g. target shares the source class).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed file on disk.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed file carrying out-of-range content.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace satlab
