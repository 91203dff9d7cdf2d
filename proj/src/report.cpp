#include "finhol/report.hpp"

#include <cstdio>
#include <fstream>

#include "finhol/errors.hpp"

namespace finhol {

Json report_skeleton(const std::string& command, std::uint64_t seed) {
  Json r;
  r["schema_version"] = kReportSchema;
  r["tool"] = Json{{"name", kToolName}, {"version", kToolVersion}};
  r["command"] = command;
  r["seed"] = seed;
  return r;
}

Json json_vector(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json json_points(std::span<const std::vector<double>> pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back(json_vector(p));
  return a;
}

Json json_matrix(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json json_square(std::span<const double> m, int n) {
  Json rows = Json::array();
  for (int i = 0; i < n; ++i) {
    Json row = Json::array();
    for (int j = 0; j < n; ++j) row.push_back(m[i * n + j]);
    rows.push_back(std::move(row));
  }
  return rows;
}

Json json_cube(std::span<const double> t, int n) {
  Json out = Json::array();
  for (int i = 0; i < n; ++i) {
    Json plane = Json::array();
    for (int j = 0; j < n; ++j) {
      Json row = Json::array();
      for (int k = 0; k < n; ++k) row.push_back(t[(i * n + j) * n + k]);
      plane.push_back(std::move(row));
    }
    out.push_back(std::move(plane));
  }
  return out;
}

void write_csv(const std::string& path, std::span<const std::string> header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write CSV file '" + path + "'");
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  char buf[64];
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("CSV row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

std::string report_to_string(const Json& report) { return report.dump(2) + "\n"; }

void emit_report(const Json& report, const std::string& out_path) {
  const std::string text = report_to_string(report);
  if (out_path.empty() || out_path == "-") {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw ConfigError("cannot write report file '" + out_path + "'");
  out << text;
}

}  // namespace finhol
