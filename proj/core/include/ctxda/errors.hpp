#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctxda {

/// Shapes of two operands do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument is outside the documented domain of an operation.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was called in the wrong order (e.g. backward before forward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Checkpoint file is unreadable, malformed or inconsistent with its use.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace ctxda
