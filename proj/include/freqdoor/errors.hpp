#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace freqdoor {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, configuration value, or shape mismatch.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t batch)
      : Error(what + " (batch " + std::to_string(batch) + ")"), batch_(batch) {}

  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t batch_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage is missing an artifact produced by an earlier stage.
class DependencyError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ParameterError(msg);
}

}  // namespace freqdoor
