#pragma once

#include <stdexcept>
#include <string>

namespace cfrl {

// Base for everything thrown by the library. The CLI maps subclasses to
// exit codes, so new error kinds should subclass one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed values handed to an operation (unknown node, value outside a
// domain, inconsistent table shape, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// A model that cannot be built: cycles, duplicate ids, probabilities that
// do not normalize, non-total tables.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

// An exact-enumeration request whose joint support exceeds the configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Evidence with zero probability under the model: no noise assignment is
// consistent with the observation.
class ContradictionError : public Error {
 public:
  using Error::Error;
};

// Importance sampling where every weight vanished.
class SupportCollapseError : public Error {
 public:
  using Error::Error;
};

// Level generation ran out of attempts.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// A policy-improvement batch with no usable weight.
class ImprovementError : public Error {
 public:
  using Error::Error;
};

// Bad configuration file. Carries the offending line when known (1-based,
// -1 when the problem is not tied to a line).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, int line = -1)
      : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace cfrl
