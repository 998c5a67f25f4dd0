#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hpoerm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Requested sizes do not fit the available data.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Operation undefined on its input (e.g. risk of an empty dataset).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Operation invoked in a state that forbids it.
class StateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hpoerm
