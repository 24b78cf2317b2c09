#pragma once

#include <vector>

namespace qarspec {

/**
 * Skewed t density
 *   f(y) = (2/sigma) t(z; nu) T(alpha z sqrt((nu+1)/(nu+z^2)); nu+1),  z = (y-mu)/sigma,
 * with t and T the Student t pdf and cdf.
 */
struct SkewTParams {
  double mu = 0.0;
  double sigma = 1.0;
  double alpha = 0.0;
  double nu = 10.0;

  void validate() const;
};

double skewt_pdf(double y, const SkewTParams& params);
double skewt_cdf(double y, const SkewTParams& params);
/// Safeguarded Newton/bisection root of cdf(x) = p; |cdf(x) - p| < 1e-10.
double skewt_quantile(double p, const SkewTParams& params);
/// Integral of the density over the real line.
double skewt_total_mass(const SkewTParams& params);

struct QuantileTargets {
  std::vector<double> probs{0.05, 0.25, 0.75, 0.95};
  std::vector<double> values;

  /// Probabilities strictly increasing in (0,1); values strictly increasing.
  void validate() const;
};

struct SkewTFitOptions {
  double nu_min = 1.01;
  double nu_max = 1e4;
  int max_restarts = 20;
  int max_iterations = 400;  ///< per simplex run
  double tolerance = 1e-15;  ///< on the standardized objective
};

struct SkewTFit {
  SkewTParams params;
  double objective = 0.0;  ///< sum of squared quantile errors, target units
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

/**
 * Least-squares match of skewed-t quantiles to the targets. Location and
 * scale are profiled out in closed form; shape and log(nu - nu_min) are
 * searched by Nelder-Mead from alpha = 0, nu = 10, restarting from the best
 * vertex until a restart no longer improves.
 */
SkewTFit fit_skewt(const QuantileTargets& targets, const SkewTFitOptions& options = {});

}  // namespace qarspec
