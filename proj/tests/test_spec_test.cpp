#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "qarspec/error.hpp"
#include "qarspec/rng.hpp"
#include "qarspec/spec_test.hpp"

namespace qarspec {
namespace {

struct Fixture {
  TimeSeries y;
  FactorSeries f;
};

Fixture make_fixture(std::size_t t, std::uint64_t seed) {
  Rng rng(seed);
  Fixture fx;
  fx.f.values.resize(static_cast<Eigen::Index>(t), 1);
  double prev = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    fx.f.values(static_cast<Eigen::Index>(i), 0) = rng.normal();
    prev = 0.3 + 0.5 * prev + rng.normal();
    fx.y.values.push_back(prev);
  }
  return fx;
}

/// Naive weights for every gamma cell, n x G, from the definition.
Eigen::MatrixXd naive_weights(const RegressionFrame& frame, const Eigen::MatrixXd* factors,
                              const WeightConfig& cfg, const std::vector<double>& grid,
                              bool per_block) {
  const int lags = std::max(frame.p, 1);
  std::vector<std::pair<double, double>> cells;
  if (factors != nullptr && per_block) {
    for (double gy : grid) {
      for (double gf : grid) cells.emplace_back(gy, gf);
    }
  } else {
    for (double g : grid) cells.emplace_back(g, g);
  }
  Eigen::MatrixXd w(static_cast<Eigen::Index>(frame.rows()),
                    static_cast<Eigen::Index>(cells.size()));
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    for (std::size_t b = 0; b < cells.size(); ++b) {
      w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b)) = oracle::history_weight(
          frame.series, factors, lags, cfg.kappa, cfg.max_lag, cells[b].first, cells[b].second,
          cfg.phi == BoundedMap::Tanh, static_cast<long>(frame.source_index(r)));
    }
  }
  return w;
}

TEST(WeightConfig, Validation) {
  WeightConfig w;
  w.kappa = 1.5;
  EXPECT_THROW(w.validate(), ParameterError);
  w = {};
  w.gamma_points = 0;
  EXPECT_THROW(w.validate(), ParameterError);
  w = {};
  w.max_lag = 0;
  EXPECT_THROW(w.validate(), ParameterError);
  w = {};
  w.gamma_max = -1.0;
  EXPECT_THROW(w.validate(), ParameterError);
}

TEST(WeightConfig, GammaGrid) {
  WeightConfig w;
  w.gamma_points = 4;
  w.gamma_max = 3.0;
  EXPECT_EQ(w.gamma_grid(), (std::vector<double>{0.0, 1.0, 2.0, 3.0}));
  w.gamma_points = 1;
  EXPECT_EQ(w.gamma_grid(), (std::vector<double>{3.0}));
}

TEST(WeightSeries, ZeroGammaGivesUnitWeights) {
  const Fixture fx = make_fixture(12, 1);
  const RegressionFrame frame = build_frame(fx.y, 1);
  const std::vector<double> g{0.0};
  for (double w : weight_series(frame, &fx.f, WeightConfig{}, g)) EXPECT_EQ(w, 1.0);
}

TEST(WeightSeries, ClosedFormForConstantHistory) {
  const RegressionFrame frame = build_frame(TimeSeries{std::vector<double>(10, 1.0), {}}, 1);
  WeightConfig cfg;
  cfg.kappa = 2.0;
  cfg.max_lag = 4;
  const std::vector<double> g{3.0};
  const std::vector<double> w = weight_series(frame, nullptr, cfg, g);
  for (std::size_t r = 0; r < w.size(); ++r) {
    double partial = 0.0;
    for (std::size_t j = 0; j <= std::min<std::size_t>(r, 4); ++j) {
      partial += 1.0 / static_cast<double>((j + 1) * (j + 1));
    }
    EXPECT_NEAR(w[r], std::exp(3.0 * std::numbers::pi / 4.0 * partial), 1e-12 * w[r]) << r;
  }
}

TEST(WeightSeries, ZeroHistoryContributesNothing) {
  const RegressionFrame frame = build_frame(TimeSeries{{0.0, 5.0}, {}}, 1);
  WeightConfig cfg;
  cfg.max_lag = 1;
  const std::vector<double> g{2.0};
  EXPECT_EQ(weight_series(frame, nullptr, cfg, g)[0], 1.0);
}

TEST(WeightSeries, GammaOutsideGrid) {
  const Fixture fx = make_fixture(12, 1);
  const RegressionFrame frame = build_frame(fx.y, 1);
  const std::vector<double> g{4.0};
  EXPECT_THROW(weight_series(frame, nullptr, WeightConfig{}, g), ParameterError);
}

TEST(WeightSeries, DependsOnTimeOrder) {
  Fixture fx = make_fixture(12, 4);
  const RegressionFrame a = build_frame(fx.y, 1);
  std::swap(fx.y.values[2], fx.y.values[3]);
  const RegressionFrame b = build_frame(fx.y, 1);
  const std::vector<double> g{1.5};
  const auto wa = weight_series(a, nullptr, WeightConfig{}, g);
  const auto wb = weight_series(b, nullptr, WeightConfig{}, g);
  EXPECT_NE(wa[5], wb[5]);
}

TEST(WeightBlocks, FactorLengthMismatch) {
  const Fixture fx = make_fixture(12, 1);
  const RegressionFrame frame = build_frame(fx.y, 1);
  FactorSeries shorter;
  shorter.values = fx.f.values.topRows(11);
  EXPECT_THROW(weight_blocks(frame, &shorter, WeightConfig{}), AlignmentError);
}

TEST(GammaCells, ProductGridLastBlockFastest) {
  WeightConfig cfg;
  cfg.gamma_points = 3;
  cfg.gamma_max = 2.0;
  cfg.structure = GammaStructure::PerBlock;
  const Eigen::MatrixXd cells = gamma_cells(cfg, 2);
  ASSERT_EQ(cells.rows(), 9);
  EXPECT_EQ(cells(0, 0), 0.0);
  EXPECT_EQ(cells(1, 1), 1.0);
  EXPECT_EQ(cells(3, 0), 1.0);
  EXPECT_EQ(cells(3, 1), 0.0);
  cfg.structure = GammaStructure::Tied;
  EXPECT_EQ(gamma_cells(cfg, 2).rows(), 3);
}

class SurfaceOracle : public ::testing::TestWithParam<std::tuple<int, bool, bool, bool>> {};

TEST_P(SurfaceOracle, MatchesDoubleLoop) {
  const auto [p, with_factors, per_block, tanh_map] = GetParam();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Fixture fx = make_fixture(10 + static_cast<std::size_t>(p), 100 + seed);
    const FactorSeries* f = with_factors ? &fx.f : nullptr;
    const RegressionFrame frame = build_frame(fx.y, p, with_factors ? &fx.f : nullptr);
    ASSERT_LE(frame.rows(), 10u);
    WeightConfig cfg;
    cfg.gamma_points = 3;
    cfg.gamma_max = 1.5;
    cfg.max_lag = 3;
    cfg.kappa = 2.5;
    cfg.phi = tanh_map ? BoundedMap::Tanh : BoundedMap::Arctan;
    cfg.structure = per_block ? GammaStructure::PerBlock : GammaStructure::Tied;
    const std::vector<double> grid{0.25, 0.5, 0.75};
    const QuantileFitPath path = fit_path(frame, grid);
    const NullHypothesis which = with_factors ? NullHypothesis::H02 : NullHypothesis::H01;
    const TestSurface s = empirical_process(frame, path, f, cfg, which);

    const Eigen::MatrixXd w =
        naive_weights(frame, with_factors ? &fx.f.values : nullptr, cfg, cfg.gamma_grid(), per_block);
    const Eigen::MatrixXd expected =
        oracle::naive_surface(frame.design, frame.response, path.coefficients, grid, w);
    ASSERT_EQ(s.values.rows(), expected.rows());
    ASSERT_EQ(s.values.cols(), expected.cols());
    EXPECT_LT((s.values - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(s.functional_cvm, oracle::naive_cvm(expected), 1e-12);
    EXPECT_NEAR(s.functional_ks, oracle::naive_ks(expected), 1e-12);
    EXPECT_GE(s.functional_ks, s.functional_cvm);
  }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, SurfaceOracle,
                         ::testing::Values(std::tuple{1, false, false, false},
                                           std::tuple{2, false, false, true},
                                           std::tuple{1, true, false, false},
                                           std::tuple{1, true, true, false},
                                           std::tuple{2, true, true, true}));

TEST(EmpiricalProcess, H01WithFactorWeights) {
  // H01: plain QAR frame, weights still condition on the factor history.
  const Fixture fx = make_fixture(10, 55);
  const RegressionFrame frame = build_frame(fx.y, 1);
  WeightConfig cfg;
  cfg.gamma_points = 2;
  cfg.structure = GammaStructure::PerBlock;
  const std::vector<double> grid{0.3, 0.7};
  const QuantileFitPath path = fit_path(frame, grid);
  const TestSurface s = empirical_process(frame, path, &fx.f, cfg, NullHypothesis::H01);
  const Eigen::MatrixXd w = naive_weights(frame, &fx.f.values, cfg, cfg.gamma_grid(), true);
  const Eigen::MatrixXd expected =
      oracle::naive_surface(frame.design, frame.response, path.coefficients, grid, w);
  EXPECT_LT((s.values - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmpiricalProcess, UnweightedCountingCollapse) {
  const Fixture fx = make_fixture(40, 3);
  const RegressionFrame frame = build_frame(fx.y, 1);
  WeightConfig cfg;
  cfg.gamma_points = 1;
  cfg.gamma_max = 0.0;
  const std::vector<double> grid{0.2, 0.5, 0.8};
  const QuantileFitPath path = fit_path(frame, grid);
  const TestSurface s = empirical_process(frame, path, nullptr, cfg, NullHypothesis::H01);
  const double n = static_cast<double>(frame.rows());
  for (std::size_t q = 0; q < grid.size(); ++q) {
    int count = 0;
    for (std::size_t t = 0; t < frame.rows(); ++t) {
      const double yt = frame.response[t];
      const double r = yt - frame.design.row(static_cast<Eigen::Index>(t))
                                .dot(path.coefficients.row(static_cast<Eigen::Index>(q)));
      count += r <= 1e-9 * (1.0 + std::abs(yt)) ? 1 : 0;
    }
    EXPECT_NEAR(s.values(static_cast<Eigen::Index>(q), 0), (count - grid[q] * n) / std::sqrt(n),
                1e-12);
  }
}

TEST(EmpiricalProcess, BoundedByWeights) {
  const Fixture fx = make_fixture(60, 9);
  const RegressionFrame frame = build_frame(fx.y, 1);
  const WeightConfig cfg;
  const std::vector<double> grid = equidistributed_grid(5);
  const QuantileFitPath path = fit_path(frame, grid);
  const TestSurface s = empirical_process(frame, path, &fx.f, cfg, NullHypothesis::H01);
  const Eigen::MatrixXd w = weight_matrix(weight_blocks(frame, &fx.f, cfg), s.gamma_cells);
  const double n = static_cast<double>(frame.rows());
  for (Eigen::Index q = 0; q < s.values.rows(); ++q) {
    const double tau = grid[static_cast<std::size_t>(q)];
    for (Eigen::Index b = 0; b < s.values.cols(); ++b) {
      EXPECT_LE(std::abs(s.values(q, b)),
                std::sqrt(n) * std::max(tau, 1.0 - tau) * w.col(b).maxCoeff() + 1e-12);
    }
  }
}

TEST(EmpiricalProcess, Validation) {
  const Fixture fx = make_fixture(20, 3);
  const RegressionFrame frame = build_frame(fx.y, 1);
  const std::vector<double> grid{0.5};
  const QuantileFitPath path = fit_path(frame, grid);
  EXPECT_THROW(empirical_process(frame, path, &fx.f, WeightConfig{}, NullHypothesis::H02),
               ParameterError);
  QuantileFitPath bad = path;
  bad.coefficients = Eigen::MatrixXd::Zero(1, 3);
  EXPECT_THROW(empirical_process(frame, bad, nullptr, WeightConfig{}, NullHypothesis::H01),
               ParameterError);
}

TEST(Functionals, Arithmetic) {
  EXPECT_EQ(cvm_functional(Eigen::MatrixXd::Zero(3, 4)), 0.0);
  EXPECT_EQ(ks_functional(Eigen::MatrixXd::Zero(3, 4)), 0.0);
  EXPECT_EQ(cvm_functional(Eigen::MatrixXd::Constant(1, 1, 2.0)), 4.0);
  Eigen::MatrixXd s(2, 2);
  s << 1, -1, 2, 0;
  EXPECT_DOUBLE_EQ(cvm_functional(s), 1.5);
  Eigen::MatrixXd k(2, 2);
  k << 1, 3, 2, 2;
  EXPECT_DOUBLE_EQ(ks_functional(k), 5.0);
  EXPECT_DOUBLE_EQ(cvm_functional(s, FunctionalForm::Literal), 0.5);
  EXPECT_DOUBLE_EQ(ks_functional(s, FunctionalForm::Literal), 2.0);
  EXPECT_THROW(cvm_functional(Eigen::MatrixXd(0, 0)), ParameterError);
  EXPECT_THROW(ks_functional(Eigen::MatrixXd(0, 0)), ParameterError);
}

TEST(Functionals, ExactCancellation) {
  // Residual signs (-,-,+,+) at tau = 0.5 with unit weights.
  RowMatrix x = RowMatrix::Ones(4, 1);
  std::vector<double> y{-1.0, -2.0, 1.0, 2.0};
  QuantileFitPath path;
  path.tau_grid = {0.5};
  path.coefficients = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::MatrixXd marks = quantile_marks(x, y, path);
  EXPECT_EQ(marks.sum(), 0.0);
}

TEST(SurfaceCsv, HeaderAndRows) {
  const Fixture fx = make_fixture(20, 3);
  const RegressionFrame frame = build_frame(fx.y, 1);
  WeightConfig cfg;
  cfg.gamma_points = 2;
  const std::vector<double> grid{0.25, 0.75};
  const TestSurface s =
      empirical_process(frame, fit_path(frame, grid), &fx.f, cfg, NullHypothesis::H01);
  std::ostringstream out;
  write_surface_csv(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tau,gamma_y,gamma_factor,S");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

}  // namespace
}  // namespace qarspec
