#pragma once

#include <stdexcept>
#include <string>

namespace feel {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested allocation or global batchsize admits no feasible plan.
class Infeasible : public Error {
 public:
  using Error::Error;
};

/// A search bracket did not straddle its root, or a monotonicity assumption
/// failed at a bracket endpoint. The message carries the diagnostics.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// GPU profile fit could not be identified from the supplied samples.
class UnderdeterminedFit : public Error {
 public:
  using Error::Error;
};

/// Oracle grid would exceed its point budget.
class CapExceeded : public Error {
 public:
  CapExceeded(const std::string& what, unsigned long long points)
      : Error(what), points_(points) {}
  unsigned long long points() const { return points_; }

 private:
  unsigned long long points_;
};

/// Malformed configuration file or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace feel
