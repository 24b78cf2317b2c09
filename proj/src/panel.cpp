#include "qarspec/panel.hpp"

#include <cmath>

#include "qarspec/error.hpp"

namespace qarspec {

Panel make_panel(const Eigen::MatrixXd& raw, std::vector<std::string> series_ids,
                 std::vector<std::string> period_index) {
  const Eigen::Index n = raw.rows();
  const Eigen::Index t = raw.cols();
  if (n < 1) throw ParameterError("panel needs at least one series");
  if (t < 2) throw ParameterError("panel needs at least two periods");
  if (series_ids.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) series_ids.push_back("s" + std::to_string(i + 1));
  }
  if (period_index.empty()) {
    for (Eigen::Index j = 0; j < t; ++j) period_index.push_back(std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(series_ids.size()) != n ||
      static_cast<Eigen::Index>(period_index.size()) != t) {
    throw ParameterError("panel label counts do not match the data shape");
  }
  if (!raw.allFinite()) throw LoadError("panel contains non-finite values");

  Panel panel;
  panel.series_ids = std::move(series_ids);
  panel.period_index = std::move(period_index);
  panel.means = raw.rowwise().mean();
  panel.values = raw.colwise() - panel.means;
  panel.scales = (panel.values.rowwise().squaredNorm() / static_cast<double>(t)).cwiseSqrt();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale = panel.scales(i);
    // Relative test so that a constant series with rounding noise is caught.
    if (!(scale > 1e-12 * std::max(1.0, std::abs(panel.means(i))))) {
      throw LoadError("series '" + panel.series_ids[static_cast<std::size_t>(i)] +
                      "' has zero variance");
    }
    panel.values.row(i) /= scale;
  }
  return panel;
}

Panel load_panel(const CsvTable& table, const PanelLayout& layout) {
  std::size_t period_col = 0;
  if (!layout.period_column.empty()) {
    const auto found = table.column(layout.period_column);
    if (!found) throw LoadError("period column '" + layout.period_column + "' not found");
    period_col = *found;
  }
  if (table.header.size() < 2) throw LoadError("panel file has no series columns");

  std::vector<std::size_t> series_cols;
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == period_col) continue;
    series_cols.push_back(j);
    ids.push_back(table.header[j]);
  }

  const auto t = static_cast<Eigen::Index>(table.rows.size());
  const auto n = static_cast<Eigen::Index>(series_cols.size());
  Eigen::MatrixXd raw(n, t);
  std::vector<std::string> periods;
  periods.reserve(table.rows.size());
  for (Eigen::Index col = 0; col < t; ++col) {
    const auto& row = table.rows[static_cast<std::size_t>(col)];
    periods.push_back(row[period_col]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& cell = row[series_cols[static_cast<std::size_t>(i)]];
      const auto value = parse_real(cell);
      if (!value || !std::isfinite(*value)) {
        throw LoadError("missing or invalid value for series '" +
                        ids[static_cast<std::size_t>(i)] + "' at period '" + periods.back() +
                        "'" + (cell.empty() ? "" : " ('" + cell + "')"));
      }
      raw(i, col) = *value;
    }
  }
  return make_panel(raw, std::move(ids), std::move(periods));
}

}  // namespace qarspec
