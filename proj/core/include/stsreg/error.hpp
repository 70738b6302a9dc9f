#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stsreg {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument violates a documented precondition (non-finite value, zero vector,
/// out-of-range index, constraint such as x0 > d/2).
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// Tensor or head dimensions disagree.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A statistic is undefined for the given data (constant vector, empty set).
class UndefinedStatistic : public Error {
public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
  ParseError(std::string path, std::size_t line, const std::string& what);

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string path_;
  std::size_t line_;
};

/// Filesystem failure (missing file, unwritable output).
class IoError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss or otherwise could not continue.
class TrainingError : public Error {
public:
  using Error::Error;
};

}  // namespace stsreg
