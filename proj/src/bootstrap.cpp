#include "qarspec/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "qarspec/error.hpp"
#include "qarspec/parallel.hpp"

namespace qarspec {

namespace {

// Type-1 empirical quantile: the ceil(p B)-th order statistic.
double order_statistic(std::vector<double> values, double p) {
  const auto b = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * b - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

template <typename Draw>
Draw draw_with_redraws(const StreamKey& key, int max_redraws, std::size_t* redraws,
                       const std::function<Draw(Rng&)>& attempt_fn) {
  for (int attempt = 0; attempt <= max_redraws; ++attempt) {
    Rng rng = key.child("attempt", static_cast<std::uint64_t>(attempt)).rng();
    try {
      return attempt_fn(rng);
    } catch (const SingularityError&) {
      if (redraws != nullptr) ++*redraws;
    }
  }
  throw NumericError("bootstrap resample rank deficient after " + std::to_string(max_redraws) +
                     " redraws");
}

}  // namespace

void BootstrapConfig::validate() const {
  if (replications < 1) throw ParameterError("bootstrap replications must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (max_redraws < 0) throw ParameterError("max_redraws must be nonnegative");
}

std::vector<std::size_t> draw_indices(std::size_t rows, Rng& rng) {
  if (rows < 2) throw ParameterError("bootstrap needs at least two rows");
  std::vector<std::size_t> idx(rows - 1);
  for (auto& i : idx) i = rng.uniform_index(rows);
  return idx;
}

Resample resample_rows(const RowMatrix& design, std::span<const double> response,
                       const Eigen::MatrixXd& weights, std::span<const std::size_t> indices) {
  const auto rows = static_cast<std::size_t>(design.rows());
  if (response.size() != rows || static_cast<std::size_t>(weights.rows()) != rows) {
    throw AlignmentError("design, response and weight rows are not aligned");
  }
  Resample out;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.design.resize(n, design.cols());
  out.response.resize(indices.size());
  out.weights.resize(n, weights.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t src = indices[static_cast<std::size_t>(r)];
    if (src >= rows) throw ParameterError("resample index out of range");
    const auto s = static_cast<Eigen::Index>(src);
    out.design.row(r) = design.row(s);
    out.response[static_cast<std::size_t>(r)] = response[src];
    out.weights.row(r) = weights.row(s);
  }
  out.indices.assign(indices.begin(), indices.end());
  return out;
}

Resample resample_rows(const RowMatrix& design, std::span<const double> response,
                       const Eigen::MatrixXd& weights, Rng& rng) {
  const std::vector<std::size_t> idx = draw_indices(static_cast<std::size_t>(design.rows()), rng);
  return resample_rows(design, response, weights, idx);
}

PreparedTest prepare_test(const RegressionFrame& frame, const FactorSeries* factors,
                          const WeightConfig& weight_cfg, std::span<const double> tau_grid,
                          NullHypothesis which_null, FunctionalForm form, int threads,
                          const SolverOptions& solver) {
  PreparedTest prepared;
  prepared.frame = frame;
  prepared.solver = solver;
  prepared.path = fit_path(frame, tau_grid, threads, solver);
  prepared.surface = empirical_process(frame, prepared.path, factors, weight_cfg, which_null, form);
  prepared.weights =
      weight_matrix(weight_blocks(frame, factors, weight_cfg), prepared.surface.gamma_cells);
  return prepared;
}

BootstrapDraw bootstrap_statistic(const PreparedTest& prepared,
                                  std::span<const std::size_t> indices) {
  const RegressionFrame& frame = prepared.frame;
  const Resample rs = resample_rows(frame.design, frame.response, prepared.weights, indices);
  const QuantileFitPath path =
      fit_path(rs.design, rs.response, prepared.path.tau_grid, 1, prepared.solver);
  const Eigen::MatrixXd marks = quantile_marks(rs.design, rs.response, path);

  const auto n = static_cast<double>(indices.size());
  const auto t_eff = static_cast<double>(frame.rows());
  BootstrapDraw draw;
  draw.surface = marks * rs.weights / std::sqrt(n) -
                 prepared.surface.values * (std::sqrt(n) / std::sqrt(t_eff));
  draw.cvm = cvm_functional(draw.surface, prepared.surface.form);
  draw.ks = ks_functional(draw.surface, prepared.surface.form);
  return draw;
}

BootstrapDraw bootstrap_statistic(const PreparedTest& prepared, const StreamKey& key,
                                  int max_redraws, std::size_t* redraws) {
  const auto rows = prepared.frame.rows();
  return draw_with_redraws<BootstrapDraw>(key, max_redraws, redraws, [&](Rng& rng) {
    const std::vector<std::size_t> idx = draw_indices(rows, rng);
    return bootstrap_statistic(prepared, idx);
  });
}

double bootstrap_p_value(double original, std::span<const double> boot) {
  if (boot.empty()) throw ParameterError("no bootstrap replications");
  const auto hits = std::count_if(boot.begin(), boot.end(), [&](double v) { return v >= original; });
  return static_cast<double>(hits) / static_cast<double>(boot.size());
}

double bootstrap_critical_value(std::span<const double> boot, double alpha) {
  if (boot.empty()) throw ParameterError("no bootstrap replications");
  return order_statistic({boot.begin(), boot.end()}, 1.0 - alpha);
}

BootstrapResult bootstrap(const PreparedTest& prepared, const BootstrapConfig& cfg) {
  cfg.validate();
  const auto b_count = static_cast<std::size_t>(cfg.replications);
  BootstrapResult result;
  result.original_cvm = prepared.surface.functional_cvm;
  result.original_ks = prepared.surface.functional_ks;
  result.boot_cvm.assign(b_count, 0.0);
  result.boot_ks.assign(b_count, 0.0);
  std::vector<std::size_t> redraws(b_count, 0);

  const StreamKey root = StreamKey(cfg.seed).child("bootstrap");
  parallel_for(b_count, cfg.threads, [&](std::size_t b) {
    const BootstrapDraw draw =
        bootstrap_statistic(prepared, root.child("replication", b), cfg.max_redraws, &redraws[b]);
    result.boot_cvm[b] = draw.cvm;
    result.boot_ks[b] = draw.ks;
  });

  for (std::size_t r : redraws) result.redraws += r;
  result.p_cvm = bootstrap_p_value(result.original_cvm, result.boot_cvm);
  result.p_ks = bootstrap_p_value(result.original_ks, result.boot_ks);
  result.critical_cvm = bootstrap_critical_value(result.boot_cvm, cfg.alpha);
  result.critical_ks = bootstrap_critical_value(result.boot_ks, cfg.alpha);
  result.reject_cvm = result.original_cvm > result.critical_cvm;
  result.reject_ks = result.original_ks > result.critical_ks;
  return result;
}

TestRun run_test(const RegressionFrame& frame, const FactorSeries* factors,
                 const WeightConfig& weight_cfg, std::span<const double> tau_grid,
                 const BootstrapConfig& boot_cfg, NullHypothesis which_null, FunctionalForm form) {
  boot_cfg.validate();
  TestRun run;
  run.prepared =
      prepare_test(frame, factors, weight_cfg, tau_grid, which_null, form, boot_cfg.threads);
  run.result = bootstrap(run.prepared, boot_cfg);
  return run;
}

PathBands bootstrap_path_bands(const RegressionFrame& frame, std::span<const double> tau_grid,
                               const BootstrapConfig& cfg, double level) {
  cfg.validate();
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("band level must lie in (0, 1)");
  validate_tau_grid(tau_grid);
  const auto b_count = static_cast<std::size_t>(cfg.replications);
  const auto m = static_cast<Eigen::Index>(tau_grid.size());
  const auto d = frame.design.cols();
  const Eigen::MatrixXd no_weights = Eigen::MatrixXd::Zero(frame.design.rows(), 0);

  std::vector<Eigen::MatrixXd> coefs(b_count);
  std::vector<std::size_t> redraws(b_count, 0);
  const StreamKey root = StreamKey(cfg.seed).child("bands");
  parallel_for(b_count, cfg.threads, [&](std::size_t b) {
    coefs[b] = draw_with_redraws<Eigen::MatrixXd>(
        root.child("replication", b), cfg.max_redraws, &redraws[b], [&](Rng& rng) {
          const Resample rs = resample_rows(frame.design, frame.response, no_weights, rng);
          return fit_path(rs.design, rs.response, tau_grid, 1).coefficients;
        });
  });

  PathBands bands;
  bands.tau_grid.assign(tau_grid.begin(), tau_grid.end());
  bands.level = level;
  bands.lower.resize(m, d);
  bands.upper.resize(m, d);
  std::vector<double> column(b_count);
  for (Eigen::Index q = 0; q < m; ++q) {
    for (Eigen::Index j = 0; j < d; ++j) {
      for (std::size_t b = 0; b < b_count; ++b) column[b] = coefs[b](q, j);
      bands.lower(q, j) = order_statistic(column, 0.5 * (1.0 - level));
      bands.upper(q, j) = order_statistic(column, 0.5 * (1.0 + level));
    }
  }
  for (std::size_t r : redraws) bands.redraws += r;
  return bands;
}

}  // namespace qarspec
