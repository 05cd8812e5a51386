#pragma once

#include <stdexcept>
#include <string>

namespace bgcon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Malformed configuration (knots, hyperparameters, schedules).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A structural invariant was violated (asymmetric matrix, bad dataset).
class InvariantError : public Error {
public:
  using Error::Error;
};

/// Non-finite value produced while evaluating a density or gradient.
class EvaluationError : public Error {
public:
  EvaluationError(const std::string& block, const std::string& what)
      : Error(what + " [" + block + "]"), block_(block) {}

  const std::string& block() const noexcept { return block_; }

private:
  std::string block_;
};

/// Input file could not be parsed. Carries the 1-based line number.
class ParseError : public Error {
public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// File missing or unwritable.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace bgcon
