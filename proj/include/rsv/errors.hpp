#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rsv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TopologyError : public Error {
  using Error::Error;
};

class RadialityError : public TopologyError {
  using TopologyError::TopologyError;
};

class IndexError : public Error {
  using Error::Error;
};

class DimensionError : public Error {
  using Error::Error;
};

class OracleDivergence : public Error {
  using Error::Error;
};

/// A region's (or the global) normal matrix is singular.
class UnderdeterminedError : public Error {
 public:
  UnderdeterminedError(const std::string& what, std::size_t null_dimension)
      : Error(what), null_dimension_(null_dimension) {}
  std::size_t null_dimension() const noexcept { return null_dimension_; }

 private:
  std::size_t null_dimension_;
};

class AccessViolation : public Error {
  using Error::Error;
};

class ConfigError : public Error {
  using Error::Error;
};

class StructuralError : public Error {
  using Error::Error;
};

}  // namespace rsv
