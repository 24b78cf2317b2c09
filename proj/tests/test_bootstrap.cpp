#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qarspec/bootstrap.hpp"
#include "qarspec/error.hpp"
#include "qarspec/rng.hpp"

namespace qarspec {
namespace {

TimeSeries ar_series(std::size_t t, std::uint64_t seed) {
  Rng rng(seed);
  TimeSeries y;
  double prev = 2.0;
  for (std::size_t i = 0; i < t; ++i) {
    prev = 1.0 + 0.5 * prev + rng.normal();
    y.values.push_back(prev);
  }
  return y;
}

WeightConfig small_weights() {
  WeightConfig w;
  w.gamma_points = 3;
  w.gamma_max = 1.0;
  w.max_lag = 2;
  return w;
}

TEST(DrawIndices, CountAndRange) {
  Rng rng(1);
  const auto idx = draw_indices(25, rng);
  EXPECT_EQ(idx.size(), 24u);
  for (auto i : idx) EXPECT_LT(i, 25u);
  EXPECT_THROW(draw_indices(1, rng), ParameterError);
}

TEST(ResampleRows, ForcedIdentityDraws) {
  const RegressionFrame f = build_frame(ar_series(11, 2), 1);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Random(10, 3);
  std::vector<std::size_t> idx(9);
  std::iota(idx.begin(), idx.end(), 0);
  const Resample rs = resample_rows(f.design, f.response, w, idx);
  EXPECT_EQ(rs.design, f.design.topRows(9));
  EXPECT_EQ(rs.weights, w.topRows(9));
  EXPECT_EQ(rs.response, std::vector<double>(f.response.begin(), f.response.begin() + 9));
}

TEST(ResampleRows, IdenticalRowsInvariant) {
  RowMatrix x(5, 2);
  x.col(0).setOnes();
  x.col(1).setConstant(3.0);
  const std::vector<double> y(5, 7.0);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(5, 2, 0.5);
  Rng rng(9);
  const Resample rs = resample_rows(x, y, w, rng);
  EXPECT_EQ(rs.design, x.topRows(4));
  EXPECT_EQ(rs.response, std::vector<double>(4, 7.0));
  EXPECT_EQ(rs.weights, w.topRows(4));
}

TEST(ResampleRows, Misaligned) {
  RowMatrix x = RowMatrix::Ones(5, 1);
  const std::vector<double> y(4, 1.0);
  const std::vector<std::size_t> idx{0, 1};
  EXPECT_THROW(resample_rows(x, y, Eigen::MatrixXd::Ones(5, 1), idx), AlignmentError);
}

TEST(BootstrapStatistic, MatchesNaiveOnSixRows) {
  const TimeSeries y = ar_series(7, 31);
  const RegressionFrame f = build_frame(y, 1);
  ASSERT_EQ(f.rows(), 6u);
  const std::vector<double> grid{0.3, 0.6};
  const PreparedTest prep =
      prepare_test(f, nullptr, small_weights(), grid, NullHypothesis::H01);
  const std::vector<std::size_t> idx{0, 4, 1, 5, 2};
  const BootstrapDraw draw = bootstrap_statistic(prep, idx);

  // Re-estimated path on the resampled rows.
  RowMatrix xs(5, 2);
  std::vector<double> ys(5);
  for (std::size_t i = 0; i < 5; ++i) {
    xs.row(static_cast<Eigen::Index>(i)) = f.design.row(static_cast<Eigen::Index>(idx[i]));
    ys[i] = f.response[idx[i]];
  }
  const QuantileFitPath star = fit_path(xs, ys, grid);

  const Eigen::MatrixXd& w = prep.weights;
  Eigen::MatrixXd expected(2, w.cols());
  for (Eigen::Index q = 0; q < 2; ++q) {
    const double tau = grid[static_cast<std::size_t>(q)];
    for (Eigen::Index b = 0; b < w.cols(); ++b) {
      double boot_sum = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        const double r = ys[i] - xs.row(static_cast<Eigen::Index>(i)).dot(star.coefficients.row(q));
        const double mark = (r <= 1e-9 * (1.0 + std::abs(ys[i])) ? 1.0 : 0.0) - tau;
        boot_sum += mark * w(static_cast<Eigen::Index>(idx[i]), b);
      }
      double orig_sum = 0.0;
      for (std::size_t t = 0; t < 6; ++t) {
        const double yt = f.response[t];
        const double r =
            yt - f.design.row(static_cast<Eigen::Index>(t)).dot(prep.path.coefficients.row(q));
        const double mark = (r <= 1e-9 * (1.0 + std::abs(yt)) ? 1.0 : 0.0) - tau;
        orig_sum += mark * w(static_cast<Eigen::Index>(t), b);
      }
      expected(q, b) = (boot_sum - 5.0 * orig_sum / 6.0) / std::sqrt(5.0);
    }
  }
  EXPECT_LT((draw.surface - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(draw.cvm, oracle::naive_cvm(expected), 1e-12);
  EXPECT_NEAR(draw.ks, oracle::naive_ks(expected), 1e-12);
}

TEST(BootstrapStatistic, SelfResampleIsZero) {
  const RegressionFrame f = build_frame(ar_series(40, 5), 1);
  const std::vector<double> grid{0.25, 0.5, 0.75};
  const PreparedTest prep = prepare_test(f, nullptr, small_weights(), grid, NullHypothesis::H01);
  std::vector<std::size_t> idx(f.rows());
  std::iota(idx.begin(), idx.end(), 0);
  const BootstrapDraw draw = bootstrap_statistic(prep, idx);
  EXPECT_LT(draw.surface.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PValue, CountsAndBounds) {
  const std::vector<double> boot{0.1, 0.5, 0.5, 2.0};
  EXPECT_EQ(bootstrap_p_value(0.5, boot), 0.75);
  EXPECT_EQ(bootstrap_p_value(3.0, boot), 0.0);
  EXPECT_EQ(bootstrap_p_value(0.0, std::vector<double>(5, 0.0)), 1.0);
  EXPECT_THROW(bootstrap_p_value(1.0, std::vector<double>{}), ParameterError);
}

TEST(CriticalValue, EmpiricalPercentile) {
  std::vector<double> boot(99);
  std::iota(boot.begin(), boot.end(), 1.0);
  std::reverse(boot.begin(), boot.end());
  // ceil(0.95 * 99) = 95th order statistic.
  EXPECT_EQ(bootstrap_critical_value(boot, 0.05), 95.0);
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  EXPECT_EQ(bootstrap_critical_value(hundred, 0.05), 95.0);
  EXPECT_EQ(bootstrap_critical_value(std::vector<double>{4.0}, 0.05), 4.0);
}

TEST(Bootstrap, DeterministicAcrossThreads) {
  const RegressionFrame f = build_frame(ar_series(80, 12), 1);
  const std::vector<double> grid = equidistributed_grid(5);
  const PreparedTest prep = prepare_test(f, nullptr, small_weights(), grid, NullHypothesis::H01);
  BootstrapConfig cfg;
  cfg.replications = 40;
  cfg.seed = 77;
  const BootstrapResult a = bootstrap(prep, cfg);
  cfg.threads = 4;
  const BootstrapResult b = bootstrap(prep, cfg);
  EXPECT_EQ(a.boot_cvm, b.boot_cvm);
  EXPECT_EQ(a.boot_ks, b.boot_ks);
  EXPECT_EQ(a.p_cvm, b.p_cvm);
  EXPECT_GE(a.p_cvm, 0.0);
  EXPECT_LE(a.p_cvm, 1.0);
  EXPECT_EQ(a.reject_cvm, a.original_cvm > a.critical_cvm);
  cfg.seed = 78;
  EXPECT_NE(bootstrap(prep, cfg).boot_cvm, a.boot_cvm);
}

double max_abs_bootstrap_mean(std::size_t t_len, int b_count) {
  const RegressionFrame f = build_frame(ar_series(t_len, 40), 1);
  const std::vector<double> grid{0.25, 0.5, 0.75};
  const PreparedTest prep = prepare_test(f, nullptr, small_weights(), grid, NullHypothesis::H01);
  const StreamKey root(99);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(prep.surface.values.rows(), prep.surface.values.cols());
  for (int b = 0; b < b_count; ++b) {
    sum += bootstrap_statistic(prep, root.child("r", static_cast<std::uint64_t>(b)), 100, nullptr)
               .surface;
  }
  return (sum / b_count).cwiseAbs().maxCoeff();
}

TEST(Bootstrap, RecenteredMeanVanishesAtRootNRate) {
  // Zero-residual basis rows leave an O(n^-1/2) tie bias; a 16x larger
  // sample should shrink the largest cell mean by roughly 4.
  const double small = max_abs_bootstrap_mean(81, 400);
  const double large = max_abs_bootstrap_mean(1281, 400);
  EXPECT_LT(large, 0.4 * small);
  EXPECT_LT(large, 0.25);
}

TEST(Bootstrap, ConfigValidation) {
  BootstrapConfig cfg;
  cfg.replications = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(RunTest, EndToEnd) {
  const TimeSeries y = ar_series(120, 3);
  const RegressionFrame f = build_frame(y, 1);
  BootstrapConfig cfg;
  cfg.replications = 19;
  const TestRun run =
      run_test(f, nullptr, small_weights(), equidistributed_grid(5), cfg, NullHypothesis::H01);
  EXPECT_EQ(run.result.boot_cvm.size(), 19u);
  EXPECT_EQ(run.result.original_cvm, run.prepared.surface.functional_cvm);
  EXPECT_EQ(run.result.original_ks, run.prepared.surface.functional_ks);
}

TEST(PathBands, OrderedAndDeterministic) {
  const RegressionFrame f = build_frame(ar_series(100, 8), 1);
  BootstrapConfig cfg;
  cfg.replications = 30;
  const std::vector<double> grid{0.25, 0.5, 0.75};
  const PathBands a = bootstrap_path_bands(f, grid, cfg, 0.9);
  cfg.threads = 3;
  const PathBands b = bootstrap_path_bands(f, grid, cfg, 0.9);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_TRUE((a.lower.array() <= a.upper.array()).all());
  EXPECT_THROW(bootstrap_path_bands(f, grid, cfg, 1.5), ParameterError);
}

}  // namespace
}  // namespace qarspec
