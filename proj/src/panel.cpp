#include "cvar/panel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cvar {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim whitespace and a trailing CR
    std::size_t b = cell.find_first_not_of(" \t\r");
    std::size_t e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_numeric(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

TimeSeriesPanel read_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParamError("cannot open panel CSV: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParamError("empty panel CSV: " + path);
  std::vector<std::string> header = split_csv_line(line);
  if (header.empty()) throw ParamError("panel CSV has no header: " + path);

  std::vector<std::vector<std::string>> raw_rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    raw_rows.push_back(split_csv_line(line));
  }
  if (raw_rows.empty()) throw ParamError("panel CSV has no data rows: " + path);

  // A leading column whose first data cell does not parse as a number is a
  // timestamp column.
  double probe;
  const bool has_timestamps = !parse_numeric(raw_rows[0][0], &probe);
  const std::size_t first_col = has_timestamps ? 1 : 0;
  if (header.size() <= first_col)
    throw ParamError("panel CSV has no numeric columns: " + path);
  const std::size_t n = header.size() - first_col;

  TimeSeriesPanel panel;
  panel.labels.assign(header.begin() + first_col, header.end());
  panel.levels.resize(static_cast<Eigen::Index>(raw_rows.size()),
                      static_cast<Eigen::Index>(n));
  if (has_timestamps) panel.timestamps.reserve(raw_rows.size());

  for (std::size_t i = 0; i < raw_rows.size(); ++i) {
    const auto& row = raw_rows[i];
    if (row.size() != header.size()) {
      throw ParamError("panel CSV row " + std::to_string(i + 2) + " has " +
                       std::to_string(row.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    if (has_timestamps) panel.timestamps.push_back(row[0]);
    for (std::size_t j = 0; j < n; ++j) {
      double v;
      if (!parse_numeric(row[first_col + j], &v) || !std::isfinite(v)) {
        throw ParamError("panel CSV cell (" + std::to_string(i + 2) + "," +
                         std::to_string(first_col + j + 1) +
                         ") is not a finite number: '" + row[first_col + j] + "'");
      }
      panel.levels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return panel;
}

void write_panel_csv(const TimeSeriesPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParamError("cannot write panel CSV: " + path);
  const bool ts = !panel.timestamps.empty();
  if (ts) out << "timestamp,";
  for (int j = 0; j < panel.dim(); ++j) {
    out << panel.labels[static_cast<std::size_t>(j)];
    out << (j + 1 < panel.dim() ? "," : "\n");
  }
  for (int i = 0; i < panel.rows(); ++i) {
    if (ts) out << panel.timestamps[static_cast<std::size_t>(i)] << ",";
    for (int j = 0; j < panel.dim(); ++j) {
      out << format_double(panel.levels(i, j));
      out << (j + 1 < panel.dim() ? "," : "\n");
    }
  }
}

}  // namespace cvar
