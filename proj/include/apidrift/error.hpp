#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apidrift {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or inputs that violate a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An API name that is not part of the category space.
class UnknownCategory : public Error {
 public:
  explicit UnknownCategory(std::string label)
      : Error("unknown API label '" + label + "'"), label_(std::move(label)) {}

  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

/// Malformed log input. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NumericFault : public Error {
 public:
  using Error::Error;
};

/// Snapshot bytes that cannot be restored (truncated, tampered, wrong version).
class CorruptSnapshot : public Error {
 public:
  using Error::Error;
};

}  // namespace apidrift
