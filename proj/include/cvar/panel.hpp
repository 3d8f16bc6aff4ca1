#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvar/errors.hpp"

namespace cvar {

/// Raw levels series: one row per time step, one column per series.
/// An optional timestamp column from the source CSV is carried along
/// untouched; the math never looks at it.
struct TimeSeriesPanel {
  Eigen::MatrixXd levels;
  std::vector<std::string> labels;
  std::vector<std::string> timestamps;  // empty, or one entry per row

  int rows() const { return static_cast<int>(levels.rows()); }
  int dim() const { return static_cast<int>(levels.cols()); }
};

/// Parse a panel CSV: header row of series labels, one row per time step.
/// A leading non-numeric column is treated as timestamps and preserved.
/// Non-finite or malformed numeric cells throw ParamError.
TimeSeriesPanel read_panel_csv(const std::string& path);

/// Write a panel CSV with 17 significant digits (round-trip exact).
void write_panel_csv(const TimeSeriesPanel& panel, const std::string& path);

/// Shortest exact decimal formatting used across all CSV output.
std::string format_double(double v);

}  // namespace cvar
