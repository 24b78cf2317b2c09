#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qarspec {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Observed series with optional period labels (empty: positional alignment).
struct TimeSeries {
  std::vector<double> values;
  std::vector<std::string> periods;
};

/// T x k factor paths with optional period labels.
struct FactorSeries {
  Eigen::MatrixXd values;
  std::vector<std::string> periods;

  [[nodiscard]] int k() const { return static_cast<int>(values.cols()); }
};

/**
 * Response and lagged design for a QAR(p) or FA-QAR(p, k) regression.
 *
 * Row r holds the response y_s with s = p + r and the regressors
 * (1, y_{s-1}, ..., y_{s-p}, F_{1,s-1}, ..., F_{k,s-1}). The full source
 * series is kept because the test weights look further back than p lags.
 */
struct RegressionFrame {
  std::vector<double> response;  ///< T_eff = T - p
  RowMatrix design;              ///< T_eff x d
  int p = 0;
  int k = 0;
  std::vector<std::string> period_index;  ///< label of each response period
  std::vector<double> series;             ///< full y, length T

  [[nodiscard]] std::size_t rows() const { return response.size(); }
  [[nodiscard]] int d() const { return static_cast<int>(design.cols()); }
  /// Position in `series` of the response of row r.
  [[nodiscard]] std::size_t source_index(std::size_t r) const {
    return r + static_cast<std::size_t>(p);
  }
};

RegressionFrame build_frame(const TimeSeries& y, int p, const FactorSeries* factors = nullptr);

/// Tick loss rho_tau(u) = u (tau - 1{u < 0}).
constexpr double tick_loss(double u, double tau) noexcept {
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

/**
 * Residual sign convention for the quantile marks 1{y - x'theta <= 0}. A
 * fitted vertex interpolates d observations exactly; their computed
 * residuals carry rounding noise, so anything within a relative 1e-9 of zero
 * counts as zero.
 */
constexpr bool residual_nonpositive(double residual, double response) noexcept {
  const double scale = 1.0 + (response < 0.0 ? -response : response);
  return residual <= 1e-9 * scale;
}

struct SolverOptions {
  double gap_tolerance = 1e-8;  ///< relative duality gap for the interior point phase
  int max_ip_iterations = 100;
  int max_pivots = 0;  ///< 0: 50 + 10 * rows
};

struct SolverStatus {
  int ip_iterations = 0;
  double ip_gap = 0.0;
  int pivots = 0;
  bool converged = false;
};

struct QuantileFit {
  Eigen::VectorXd coefficients;
  double objective = 0.0;
  SolverStatus status;
};

/**
 * Minimizes sum_t rho_tau(y_t - x_t'theta) over theta.
 *
 * A Frisch-Newton interior point method on the bounded dual LP gets close to
 * the optimum; a vertex polish then walks simplex edges until the exact
 * optimal basic solution is reached. When the optimum is not unique the
 * polish returns the vertex that stays optimal for tau + 0 (the
 * right-continuous choice, e.g. the second order statistic of {1,2,3,4} at
 * tau = 0.25).
 *
 * Throws SingularityError for rank-deficient designs and NumericError if the
 * polish does not terminate.
 */
QuantileFit solve_quantile_regression(const RowMatrix& design, std::span<const double> response,
                                      double tau, const SolverOptions& options = {});

/// Throws SingularityError if the design has rank below its column count.
void require_full_rank(const RowMatrix& design);

QuantileFit fit_quantile(const RegressionFrame& frame, double tau,
                         const SolverOptions& options = {});

struct QuantileFitPath {
  std::vector<double> tau_grid;
  Eigen::MatrixXd coefficients;  ///< m x d
  std::vector<double> objective;
  std::vector<SolverStatus> diagnostics;
  /// crossings[q]: rows where the fitted tau_{q+1} quantile lies below tau_q.
  std::vector<std::size_t> crossings;
};

/// Strictly increasing grid inside (0, 1); throws ParameterError otherwise.
void validate_tau_grid(std::span<const double> grid);

/// m equidistributed points from lo to hi inclusive.
std::vector<double> equidistributed_grid(std::size_t m, double lo = 0.1, double hi = 0.9);

QuantileFitPath fit_path(const RegressionFrame& frame, std::span<const double> tau_grid,
                         int threads = 1, const SolverOptions& options = {});

/// Path estimation on an arbitrary design (used for bootstrap resamples).
QuantileFitPath fit_path(const RowMatrix& design, std::span<const double> response,
                         std::span<const double> tau_grid, int threads = 1,
                         const SolverOptions& options = {});

}  // namespace qarspec
