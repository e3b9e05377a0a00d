#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fte {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or record (missing fields, bad numbers, broken invariants).
class FormatError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ExportError : public Error {
 public:
  using Error::Error;
};

/// Integration produced a non-finite state.
class RolloutError : public Error {
 public:
  RolloutError(std::size_t step, const std::string& what)
      : Error("rollout diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace fte
