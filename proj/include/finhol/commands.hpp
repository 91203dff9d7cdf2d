#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "finhol/config.hpp"
#include "finhol/report.hpp"

namespace finhol {

// Front-end plumbing shared by the CLI binary and the tests: parse a config
// file, run one subcommand, assemble the report and write any configured CSV
// side files.  Errors surface as the library exception types; the binary
// maps them to exit codes (ConfigError 2, DegenerateModelError 3,
// NumericalError 4).

struct RunOptions {
  std::string config_path;
  std::string out_path;                // empty or "-" = stdout
  std::optional<std::uint64_t> seed;   // overrides [run].seed
  int threads = 1;                     // experiment blocks are independent; >1 is advisory
  bool verbose = false;                // progress and generation logs on stderr
};

// command is one of "inspect", "algebra", "holonomy", "transport".
Json run_command(const std::string& command, const RunOptions& opts);

}  // namespace finhol
