#pragma once

#include <stdexcept>
#include <string>

namespace h2slow {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or unreadable input data. The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration. The CLI maps these to exit code 3.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnreadableInput : public InputError {
 public:
  using InputError::InputError;
};

class EmptyTraining : public InputError {
 public:
  EmptyTraining() : InputError("no flows available for training") {}
};

class OversizedPayload : public Error {
 public:
  using Error::Error;
};

class StillOpen : public Error {
 public:
  StillOpen() : Error("flow has not been closed") {}
};

class NoClosedFlows : public Error {
 public:
  NoClosedFlows() : Error("no closed flows") {}
};

class NoAnomalies : public Error {
 public:
  NoAnomalies() : Error("no anomalous verdicts") {}
};

class DecidedFlow : public Error {
 public:
  DecidedFlow() : Error("event delivered to an already decided flow") {}
};

class WindowMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ScenarioInvalid : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ConnectRefused : public Error {
 public:
  using Error::Error;
};

}  // namespace h2slow
