#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace finhol {

// Report assembly: one schema-versioned JSON document per run, plus optional
// CSV side files for convergence tables.  Key order is fixed by insertion
// order (nlohmann::ordered_json), and all wall-clock numbers live under the
// single top-level "timings" object, so two runs with the same config and
// seed compare byte-identical once "timings" is dropped.

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "finhol";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchema = 1;

Json report_skeleton(const std::string& command, std::uint64_t seed);

Json json_vector(std::span<const double> v);
Json json_points(std::span<const std::vector<double>> pts);
Json json_matrix(const Eigen::MatrixXd& m);
// Row-major n*n buffer -> nested [i][j].
Json json_square(std::span<const double> m, int n);
// Row-major n*n*n buffer -> nested [i][j][k].
Json json_cube(std::span<const double> t, int n);

// CSV with a header row; every data row must match the header width.
void write_csv(const std::string& path, std::span<const std::string> header,
               const std::vector<std::vector<double>>& rows);

// Serialized document (2-space indent, trailing newline).
std::string report_to_string(const Json& report);
// Empty path or "-" prints to stdout, otherwise writes the file.
void emit_report(const Json& report, const std::string& out_path);

}  // namespace finhol
