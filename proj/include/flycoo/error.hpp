#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flycoo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// No (m, g) pair satisfies the partitioning constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A structural invariant was broken at run time (e.g. a remap shard overflowed).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace flycoo
