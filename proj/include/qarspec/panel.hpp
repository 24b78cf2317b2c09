#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "qarspec/csv.hpp"

namespace qarspec {

/**
 * N series observed over T periods, standardized row by row to mean 0 and
 * unit variance (population normalization, divisor T). The raw means and
 * standard deviations are kept so the transformation is auditable.
 */
struct Panel {
  Eigen::MatrixXd values;  ///< N x T, standardized
  std::vector<std::string> series_ids;
  std::vector<std::string> period_index;
  Eigen::VectorXd means;   ///< per-series raw mean
  Eigen::VectorXd scales;  ///< per-series raw standard deviation

  [[nodiscard]] Eigen::Index num_series() const { return values.rows(); }
  [[nodiscard]] Eigen::Index num_periods() const { return values.cols(); }
};

struct PanelLayout {
  std::string period_column;  ///< empty: the first column holds period labels
};

/// Builds a panel from a period-per-row table (one column per series).
Panel load_panel(const CsvTable& table, const PanelLayout& layout = {});

/// Standardizes an in-memory N x T matrix. Labels default to "s<i>" / "<t>".
Panel make_panel(const Eigen::MatrixXd& raw, std::vector<std::string> series_ids = {},
                 std::vector<std::string> period_index = {});

}  // namespace qarspec
