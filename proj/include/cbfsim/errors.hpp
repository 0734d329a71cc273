#pragma once

#include <stdexcept>
#include <string>

namespace cbfsim {

/// Bad configuration or malformed input: wrong dimensions, invalid model
/// parameters, missing files, unparsable JSON. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A domain precondition is violated with otherwise well-formed inputs,
/// e.g. a scenario whose initial state is already inside the obstacle
/// clearance sphere. CLI maps this to exit code 3.
class PreconditionError : public std::runtime_error {
public:
  explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

/// Failure while running: solver breakdown, numerical divergence. CLI maps
/// this to exit code 4.
class RuntimeFault : public std::runtime_error {
public:
  explicit RuntimeFault(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cbfsim
