#pragma once

#include <stdexcept>
#include <string>

namespace pcoord {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

/// A kinematic state outside the admissible set (e.g. entry speed above the route limit).
class InfeasibleState : public Error {
 public:
  using Error::Error;
};

/// The schedule zone is too short to reach the speed limit or to stop.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// An assigned merging-zone entry time cannot be met by any admissible control.
class InfeasibleSchedule : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, int line, std::string key)
      : ConfigError(what), line_(line), key_(std::move(key)) {}

  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// Raised by the simulation engine; the message carries a state dump.
class SimulationFault : public Error {
 public:
  using Error::Error;
};

}  // namespace pcoord
