#pragma once

#include <stdexcept>
#include <string>

namespace capex {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or incomplete configuration input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A standing model assumption does not hold for the supplied data.
class AssumptionError : public Error {
 public:
  using Error::Error;
};

/// The boundary solver could not bracket or converge on a root.
class SolverError : public Error {
 public:
  enum class Kind { Bracket, NonConvergence };

  SolverError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Inputs built on different grids or models were combined.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail
}  // namespace capex
