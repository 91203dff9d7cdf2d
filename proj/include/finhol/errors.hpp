#pragma once

#include <stdexcept>
#include <string>

namespace finhol {

// Error taxonomy, mirrored by the CLI exit codes:
//   ConfigError          -> exit 2 (unparseable or inconsistent input)
//   DegenerateModelError -> exit 3 (model fails positive-definiteness etc.)
//   NumericalError       -> exit 4 (integrator failure, jet domain violation)
// Programming-contract violations (shape mismatches, bad indices) throw
// std::invalid_argument and are not expected to surface in normal runs.

class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DegenerateModelError : public std::runtime_error {
public:
  explicit DegenerateModelError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace finhol
