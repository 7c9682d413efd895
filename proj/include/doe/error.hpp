#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace doe {

// Malformed or inconsistent input data (cycles, unknown names, empty files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

// A negative sampler could not produce a valid pair within its retry budget.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during optimization.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace doe
