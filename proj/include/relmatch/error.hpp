#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relmatch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch inside a primitive or when restoring a checkpoint.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf reached a primitive.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace relmatch
