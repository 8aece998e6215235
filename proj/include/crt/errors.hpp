#pragma once

#include <stdexcept>
#include <string>

namespace crt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// No polynomial up to the configured degree passed verification.
class ConstructionFailure : public Error {
 public:
  using Error::Error;
};

/// The one-step budget lies outside the small-error regime.
class BudgetRegimeViolation : public Error {
 public:
  using Error::Error;
};

/// A lifted or horizon dimension exceeds the configured memory cap.
class MemoryBudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// A step closure is not captured by a polynomial of the requested degree.
class DegreeOverflow : public Error {
 public:
  using Error::Error;
};

/// No cutoff up to N_max satisfies the truncation share of the budget.
class InfeasibleBudget : public Error {
 public:
  using Error::Error;
};

class DesignInfeasible : public Error {
 public:
  using Error::Error;
};

class DegenerateBlock : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace crt
