#pragma once
// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, DataError -> 3, EnvironmentError -> 4.

#include <stdexcept>
#include <string>

namespace skillbook {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad flags, malformed config files, contradictory options.
struct ConfigError : Error {
  using Error::Error;
};

// Schema violations, unknown ids, inconsistent handbooks or trajectories.
struct DataError : Error {
  using Error::Error;
};

// Failures of the world around us: missing files at runtime, remote agents
// misbehaving past their retry budget, unexpected internal states.
struct EnvironmentError : Error {
  using Error::Error;
};

// DataError with a JSON-pointer-ish locator for the offending field.
struct SchemaError : DataError {
  SchemaError(const std::string& path, const std::string& message)
      : DataError(path + ": " + message), path(path) {}
  std::string path;
};

struct UnknownModeError : DataError {
  explicit UnknownModeError(const std::string& mode)
      : DataError("unknown mode: " + mode), mode(mode) {}
  std::string mode;
};

struct UnknownAgentError : DataError {
  explicit UnknownAgentError(const std::string& agent)
      : DataError("unknown agent: " + agent), agent(agent) {}
  std::string agent;
};

}  // namespace skillbook
