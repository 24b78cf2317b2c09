#include "qarspec/qar.hpp"

#include <cmath>

#include "qarspec/error.hpp"
#include "qarspec/parallel.hpp"

namespace qarspec {

RegressionFrame build_frame(const TimeSeries& y, int p, const FactorSeries* factors) {
  const std::size_t t = y.values.size();
  if (p < 0) throw ParameterError("lag order p must be nonnegative");
  if (t <= static_cast<std::size_t>(p)) {
    throw ParameterError("series length " + std::to_string(t) + " must exceed lag order p=" +
                         std::to_string(p));
  }
  if (!y.periods.empty() && y.periods.size() != t) {
    throw ParameterError("series has " + std::to_string(y.periods.size()) +
                         " period labels for " + std::to_string(t) + " values");
  }
  int k = 0;
  if (factors != nullptr) {
    k = factors->k();
    if (static_cast<std::size_t>(factors->values.rows()) != t) {
      throw AlignmentError("factor series has " + std::to_string(factors->values.rows()) +
                           " periods, response has " + std::to_string(t));
    }
    if (!factors->periods.empty() && factors->periods.size() != t) {
      throw AlignmentError("factor series has a period index of the wrong length");
    }
    if (!y.periods.empty() && !factors->periods.empty() && factors->periods != y.periods) {
      std::size_t first = 0;
      while (first < t && factors->periods[first] == y.periods[first]) ++first;
      throw AlignmentError("factor period index does not match the response at position " +
                           std::to_string(first) + " ('" + factors->periods[first] + "' vs '" +
                           y.periods[first] + "')");
    }
  }

  RegressionFrame frame;
  frame.p = p;
  frame.k = k;
  frame.series = y.values;
  const std::size_t rows = t - static_cast<std::size_t>(p);
  const int d = 1 + p + k;
  frame.response.resize(rows);
  frame.design.resize(static_cast<Eigen::Index>(rows), d);
  frame.period_index.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t s = r + static_cast<std::size_t>(p);
    const auto row = static_cast<Eigen::Index>(r);
    frame.response[r] = y.values[s];
    frame.design(row, 0) = 1.0;
    for (int lag = 1; lag <= p; ++lag) {
      frame.design(row, lag) = y.values[s - static_cast<std::size_t>(lag)];
    }
    for (int j = 0; j < k; ++j) {
      // Factors enter with one lag; s >= 1 whenever p >= 1. For p = 0 the
      // first period has no lagged factor, which is rejected below.
      if (s == 0) throw ParameterError("a factor-augmented frame needs p >= 1");
      frame.design(row, 1 + p + j) = factors->values(static_cast<Eigen::Index>(s - 1), j);
    }
    frame.period_index.push_back(y.periods.empty() ? std::to_string(s + 1) : y.periods[s]);
  }
  if (!frame.design.allFinite()) throw ParameterError("design contains non-finite values");
  return frame;
}

QuantileFit fit_quantile(const RegressionFrame& frame, double tau, const SolverOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ParameterError("quantile level tau=" + std::to_string(tau) + " outside (0,1)");
  }
  if (frame.rows() < static_cast<std::size_t>(frame.d())) {
    throw ParameterError("frame has fewer rows than regressors");
  }
  require_full_rank(frame.design);
  return solve_quantile_regression(frame.design, frame.response, tau, options);
}

void validate_tau_grid(std::span<const double> grid) {
  if (grid.empty()) throw ParameterError("tau grid is empty");
  for (std::size_t q = 0; q < grid.size(); ++q) {
    if (!(grid[q] > 0.0 && grid[q] < 1.0)) {
      throw ParameterError("tau grid value " + std::to_string(grid[q]) + " outside (0,1)");
    }
    if (q > 0 && !(grid[q] > grid[q - 1])) {
      throw ParameterError("tau grid must be strictly increasing");
    }
  }
}

std::vector<double> equidistributed_grid(std::size_t m, double lo, double hi) {
  if (m == 0) throw ParameterError("grid size must be positive");
  if (m == 1) return {0.5 * (lo + hi)};
  std::vector<double> grid(m);
  for (std::size_t q = 0; q < m; ++q) {
    grid[q] = lo + (hi - lo) * static_cast<double>(q) / static_cast<double>(m - 1);
  }
  return grid;
}

QuantileFitPath fit_path(const RowMatrix& design, std::span<const double> response,
                         std::span<const double> tau_grid, int threads,
                         const SolverOptions& options) {
  validate_tau_grid(tau_grid);
  require_full_rank(design);
  const std::size_t m = tau_grid.size();

  QuantileFitPath path;
  path.tau_grid.assign(tau_grid.begin(), tau_grid.end());
  path.coefficients.resize(static_cast<Eigen::Index>(m), design.cols());
  path.objective.resize(m);
  path.diagnostics.resize(m);

  parallel_for(m, threads, [&](std::size_t q) {
    QuantileFit fit;
    try {
      fit = solve_quantile_regression(design, response, tau_grid[q], options);
    } catch (const NumericError& e) {
      throw NumericError("tau=" + std::to_string(tau_grid[q]) + ": " + e.what());
    }
    path.coefficients.row(static_cast<Eigen::Index>(q)) = fit.coefficients.transpose();
    path.objective[q] = fit.objective;
    path.diagnostics[q] = fit.status;
  });

  if (m > 1) {
    const Eigen::MatrixXd fitted = design * path.coefficients.transpose();
    path.crossings.assign(m - 1, 0);
    for (std::size_t q = 0; q + 1 < m; ++q) {
      for (Eigen::Index r = 0; r < fitted.rows(); ++r) {
        if (fitted(r, static_cast<Eigen::Index>(q + 1)) < fitted(r, static_cast<Eigen::Index>(q))) {
          ++path.crossings[q];
        }
      }
    }
  }
  return path;
}

QuantileFitPath fit_path(const RegressionFrame& frame, std::span<const double> tau_grid,
                         int threads, const SolverOptions& options) {
  return fit_path(frame.design, frame.response, tau_grid, threads, options);
}

}  // namespace qarspec
