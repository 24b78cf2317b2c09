#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "qarspec/qar.hpp"
#include "qarspec/rng.hpp"
#include "qarspec/spec_test.hpp"

namespace qarspec {

struct BootstrapConfig {
  int replications = 99;
  std::uint64_t seed = 20240101;
  double alpha = 0.05;
  int threads = 1;
  /// Cap on redraws of a single replication whose resample is rank deficient.
  int max_redraws = 100;

  void validate() const;
};

struct BootstrapResult {
  double original_cvm = 0.0;
  double original_ks = 0.0;
  std::vector<double> boot_cvm;  ///< in replication order
  std::vector<double> boot_ks;
  double p_cvm = 0.0;
  double p_ks = 0.0;
  double critical_cvm = 0.0;
  double critical_ks = 0.0;
  bool reject_cvm = false;
  bool reject_ks = false;
  std::size_t redraws = 0;  ///< resamples discarded for rank deficiency
};

/// n = rows - 1 iid uniform draws from {0, ..., rows - 1}.
std::vector<std::size_t> draw_indices(std::size_t rows, Rng& rng);

/// Rows of a resample; weights are the T_eff x G weight matrix rows.
struct Resample {
  RowMatrix design;
  std::vector<double> response;
  Eigen::MatrixXd weights;
  std::vector<std::size_t> indices;
};

Resample resample_rows(const RowMatrix& design, std::span<const double> response,
                       const Eigen::MatrixXd& weights, std::span<const std::size_t> indices);
Resample resample_rows(const RowMatrix& design, std::span<const double> response,
                       const Eigen::MatrixXd& weights, Rng& rng);

/// Everything computed once on the original sample.
struct PreparedTest {
  RegressionFrame frame;
  Eigen::MatrixXd weights;  ///< T_eff x G
  QuantileFitPath path;
  TestSurface surface;
  SolverOptions solver;
};

PreparedTest prepare_test(const RegressionFrame& frame, const FactorSeries* factors,
                          const WeightConfig& weight_cfg, std::span<const double> tau_grid,
                          NullHypothesis which_null, FunctionalForm form = FunctionalForm::Squared,
                          int threads = 1, const SolverOptions& solver = {});

struct BootstrapDraw {
  Eigen::MatrixXd surface;  ///< m x G recentred bootstrap process
  double cvm = 0.0;
  double ks = 0.0;
};

/**
 * One replication on fixed draws: refit the path on the resampled rows and
 * form n^{-1/2} sum_draws mark* w* minus the original-sample average term
 * scaled to n rows. Throws SingularityError if the resampled design is rank
 * deficient.
 */
BootstrapDraw bootstrap_statistic(const PreparedTest& prepared,
                                  std::span<const std::size_t> indices);

/// Replication with draws from `key`; rank-deficient resamples are redrawn.
BootstrapDraw bootstrap_statistic(const PreparedTest& prepared, const StreamKey& key,
                                  int max_redraws, std::size_t* redraws = nullptr);

/// Upper-tail p-value count(boot >= original) / B.
double bootstrap_p_value(double original, std::span<const double> boot);

/// Empirical (1 - alpha) percentile: the ceil((1 - alpha) B)-th order statistic.
double bootstrap_critical_value(std::span<const double> boot, double alpha);

BootstrapResult bootstrap(const PreparedTest& prepared, const BootstrapConfig& cfg);

struct TestRun {
  PreparedTest prepared;
  BootstrapResult result;
};

/// Fit, original surface, B replications, p-values and critical values.
TestRun run_test(const RegressionFrame& frame, const FactorSeries* factors,
                 const WeightConfig& weight_cfg, std::span<const double> tau_grid,
                 const BootstrapConfig& boot_cfg, NullHypothesis which_null,
                 FunctionalForm form = FunctionalForm::Squared);

/// Pointwise bootstrap percentile bands for a coefficient path.
struct PathBands {
  std::vector<double> tau_grid;
  double level = 0.9;
  Eigen::MatrixXd lower;  ///< m x d
  Eigen::MatrixXd upper;
  std::size_t redraws = 0;
};

PathBands bootstrap_path_bands(const RegressionFrame& frame, std::span<const double> tau_grid,
                               const BootstrapConfig& cfg, double level = 0.9);

}  // namespace qarspec
