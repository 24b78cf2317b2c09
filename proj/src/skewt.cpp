#include "qarspec/skewt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "qarspec/error.hpp"
#include "qarspec/student_t.hpp"

namespace qarspec {

namespace {

using DoublePolicy =
    boost::math::policies::policy<boost::math::policies::promote_double<false>>;

// Standardized skewed t (mu = 0, sigma = 1) with the t normalization cached.
class Standard {
 public:
  Standard(double alpha, double nu)
      : alpha_(alpha),
        nu_(nu),
        norm_(1.0 / boost::math::tgamma_delta_ratio(0.5 * nu, 0.5, DoublePolicy()) /
              std::sqrt(nu * std::numbers::pi)) {}

  [[nodiscard]] double pdf(double z) const {
    const double w = alpha_ * z * std::sqrt((nu_ + 1.0) / (nu_ + z * z));
    return 2.0 * norm_ * std::exp(-0.5 * (nu_ + 1.0) * std::log1p(z * z / nu_)) *
           student_t_cdf(w, nu_ + 1.0);
  }

  // P(Z <= 0): the sign of a skewed t variate is that of its skew-normal
  // numerator.
  [[nodiscard]] double cdf_at_zero() const {
    return 0.5 - std::atan(alpha_) / std::numbers::pi;
  }

  [[nodiscard]] double cdf(double z) const {
    if (std::isinf(z)) return z > 0.0 ? 1.0 : 0.0;
    if (alpha_ == 0.0) return student_t_cdf(z, nu_);
    if (z == 0.0) return cdf_at_zero();
    boost::math::quadrature::exp_sinh<double> tail;
    const double inf = std::numeric_limits<double>::infinity();
    if (z < 0.0) return tail.integrate([&](double s) { return pdf(-s); }, -z, inf, 1e-13);
    return 1.0 - tail.integrate([&](double s) { return pdf(s); }, z, inf, 1e-13);
  }

  // Integral of the density over [a, b] (finite, any order).
  [[nodiscard]] double mass(double a, double b) const {
    if (a == b) return 0.0;
    // Short steps: Simpson's rule is exact to O(h^5) and avoids adaptive
    // refinement chasing roundoff on near-empty intervals.
    if (std::abs(b - a) < 1e-2) return (b - a) / 6.0 * (pdf(a) + 4.0 * pdf(0.5 * (a + b)) + pdf(b));
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double value = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
        [&](double s) { return pdf(s); }, lo, hi, 10, 1e-12);
    return a < b ? value : -value;
  }

  // Safeguarded Newton from the median-side anchor z = 0, integrating the
  // density across each step, then re-anchored on direct evaluations.
  [[nodiscard]] double quantile(double p) const {
    double x = 0.0;
    double f = cdf_at_zero();
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::ostringstream trace;
    for (int iter = 0; iter < 400; ++iter) {
      const double diff = f - p;
      if (std::abs(diff) < 1e-14) break;
      if (diff < 0.0) {
        lo = x;
      } else {
        hi = x;
      }
      double next = x - diff / pdf(x);
      if (!(std::isfinite(next) && next > lo && next < hi)) {
        if (std::isfinite(lo) && std::isfinite(hi)) {
          next = 0.5 * (lo + hi);
        } else if (std::isfinite(lo)) {
          next = lo + std::max(1.0, std::abs(lo));
        } else {
          next = hi - std::max(1.0, std::abs(hi));
        }
      }
      if (iter % 20 == 19) trace << " [" << lo << ", " << hi << "]";
      f += mass(x, next);
      const double step = next - x;
      x = next;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(x))) break;
    }
    for (int iter = 0; iter < 5; ++iter) {
      const double diff = cdf(x) - p;
      if (std::abs(diff) < 1e-12) return x;
      const double density = pdf(x);
      if (!(density > 0.0)) break;
      x -= diff / density;
    }
    if (std::abs(cdf(x) - p) < 1e-10) return x;
    throw NumericError("skewed-t quantile did not converge for p=" + std::to_string(p) +
                       "; brackets:" + trace.str());
  }

  // Integral over the whole line, split at 0.
  [[nodiscard]] double total_mass() const {
    boost::math::quadrature::exp_sinh<double> tail;
    const double inf = std::numeric_limits<double>::infinity();
    return tail.integrate([&](double s) { return pdf(-s); }, 0.0, inf, 1e-13) +
           tail.integrate([&](double s) { return pdf(s); }, 0.0, inf, 1e-13);
  }

 private:
  double alpha_;
  double nu_;
  double norm_;
};

double nu_of(double eta, const SkewTFitOptions& opt) {
  return std::min(opt.nu_min + std::exp(std::min(eta, 700.0)), opt.nu_max);
}

struct Profile {
  double objective = 0.0;
  double mu = 0.0;
  double sigma = 1.0;
};

// Closed-form least squares of values on (1, standardized quantiles).
Profile profile(const std::vector<double>& probs, const std::vector<double>& values,
                double alpha, double nu) {
  const std::size_t n = probs.size();
  const Standard dist(alpha, nu);
  std::vector<double> q(n);
  for (std::size_t j = 0; j < n; ++j) q[j] = dist.quantile(probs[j]);
  double qbar = 0.0;
  double vbar = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    qbar += q[j];
    vbar += values[j];
  }
  qbar /= static_cast<double>(n);
  vbar /= static_cast<double>(n);
  double sqq = 0.0;
  double sqv = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sqq += (q[j] - qbar) * (q[j] - qbar);
    sqv += (q[j] - qbar) * (values[j] - vbar);
  }
  Profile out;
  out.sigma = sqv / sqq;
  if (!(out.sigma > 0.0)) {
    out.objective = std::numeric_limits<double>::infinity();
    return out;
  }
  out.mu = vbar - out.sigma * qbar;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = values[j] - out.mu - out.sigma * q[j];
    out.objective += r * r;
  }
  return out;
}

}  // namespace

void SkewTParams::validate() const {
  if (!std::isfinite(mu)) throw ParameterError("skewed-t mu must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("skewed-t sigma must be > 0");
  if (!std::isfinite(alpha)) throw ParameterError("skewed-t alpha must be finite");
  if (!(nu > 0.0)) throw ParameterError("skewed-t nu must be > 0");
}

double skewt_pdf(double y, const SkewTParams& params) {
  params.validate();
  return Standard(params.alpha, params.nu).pdf((y - params.mu) / params.sigma) / params.sigma;
}

double skewt_cdf(double y, const SkewTParams& params) {
  params.validate();
  return Standard(params.alpha, params.nu).cdf((y - params.mu) / params.sigma);
}

double skewt_quantile(double p, const SkewTParams& params) {
  params.validate();
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("quantile probability must lie in (0, 1)");
  return params.mu + params.sigma * Standard(params.alpha, params.nu).quantile(p);
}

double skewt_total_mass(const SkewTParams& params) {
  params.validate();
  return Standard(params.alpha, params.nu).total_mass();
}

void QuantileTargets::validate() const {
  if (probs.size() != values.size()) {
    throw ParameterError("quantile targets: " + std::to_string(probs.size()) +
                         " probabilities but " + std::to_string(values.size()) + " values");
  }
  if (probs.size() < 4) throw ParameterError("at least four target quantiles are required");
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!(probs[j] > 0.0 && probs[j] < 1.0)) {
      throw ParameterError("target probability outside (0, 1)");
    }
    if (!std::isfinite(values[j])) throw ParameterError("target quantile is not finite");
    if (j > 0 && !(probs[j] > probs[j - 1])) {
      throw ParameterError("target probabilities must be strictly increasing");
    }
    if (j > 0 && values[j] < values[j - 1]) {
      throw ParameterError("target quantiles cross between p=" + std::to_string(probs[j - 1]) +
                           " and p=" + std::to_string(probs[j]));
    }
    if (j > 0 && values[j] == values[j - 1]) {
      throw ParameterError("degenerate (flat) target quantiles at p=" + std::to_string(probs[j]));
    }
  }
}

SkewTFit fit_skewt(const QuantileTargets& targets, const SkewTFitOptions& options) {
  targets.validate();
  if (!(options.nu_min > 0.0 && options.nu_max > options.nu_min)) {
    throw ParameterError("invalid nu bounds");
  }

  // Standardize targets so the search is location-scale equivariant.
  const auto n = static_cast<double>(targets.values.size());
  double center = 0.0;
  for (double v : targets.values) center += v;
  center /= n;
  double spread = 0.0;
  for (double v : targets.values) spread += (v - center) * (v - center);
  spread = std::sqrt(spread / n);
  std::vector<double> z(targets.values.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = (targets.values[j] - center) / spread;

  using Point = std::array<double, 2>;  // (alpha, eta)
  auto objective = [&](const Point& x) {
    if (std::abs(x[0]) > 1e3) return std::numeric_limits<double>::infinity();
    try {
      return profile(targets.probs, z, x[0], nu_of(x[1], options)).objective;
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  SkewTFit fit;
  Point best{0.0, std::log(10.0 - options.nu_min)};
  double best_f = objective(best);
  double step = 0.5;
  bool converged = false;

  for (int run = 0; run <= options.max_restarts; ++run) {
    std::array<Point, 3> simplex{best, Point{best[0] + step, best[1]},
                                 Point{best[0], best[1] + step}};
    std::array<double, 3> fv{best_f, objective(simplex[1]), objective(simplex[2])};
    bool tolerance_reached = false;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
      ++fit.iterations;
      std::array<int, 3> order{0, 1, 2};
      std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
      std::array<Point, 3> s{simplex[order[0]], simplex[order[1]], simplex[order[2]]};
      std::array<double, 3> f{fv[order[0]], fv[order[1]], fv[order[2]]};
      simplex = s;
      fv = f;

      const double size = std::max(std::abs(s[1][0] - s[0][0]) + std::abs(s[1][1] - s[0][1]),
                                   std::abs(s[2][0] - s[0][0]) + std::abs(s[2][1] - s[0][1]));
      if (f[2] - f[0] <= options.tolerance && size < 1e-9) {
        tolerance_reached = true;
        break;
      }

      const Point centroid{0.5 * (s[0][0] + s[1][0]), 0.5 * (s[0][1] + s[1][1])};
      auto along = [&](double c) {
        return Point{centroid[0] + c * (s[2][0] - centroid[0]),
                     centroid[1] + c * (s[2][1] - centroid[1])};
      };
      const Point reflected = along(-1.0);
      const double fr = objective(reflected);
      if (fr < f[0]) {
        const Point expanded = along(-2.0);
        const double fe = objective(expanded);
        if (fe < fr) {
          simplex[2] = expanded;
          fv[2] = fe;
        } else {
          simplex[2] = reflected;
          fv[2] = fr;
        }
      } else if (fr < f[1]) {
        simplex[2] = reflected;
        fv[2] = fr;
      } else {
        const bool outside = fr < f[2];
        const Point contracted = along(outside ? -0.5 : 0.5);
        const double fc = objective(contracted);
        if (fc < (outside ? fr : f[2])) {
          simplex[2] = contracted;
          fv[2] = fc;
        } else {
          for (int i = 1; i < 3; ++i) {
            simplex[i] = Point{0.5 * (s[0][0] + s[i][0]), 0.5 * (s[0][1] + s[i][1])};
            fv[i] = objective(simplex[i]);
          }
        }
      }
    }
    const auto it = std::min_element(fv.begin(), fv.end());
    const Point candidate = simplex[static_cast<std::size_t>(it - fv.begin())];
    const double improvement = best_f - *it;
    if (*it <= best_f) {
      best = candidate;
      best_f = *it;
    }
    fit.restarts = run;
    if (tolerance_reached && improvement <= options.tolerance) {
      converged = true;
      break;
    }
    step = 0.25;
  }

  const double nu = nu_of(best[1], options);
  const Profile prof = profile(targets.probs, z, best[0], nu);
  fit.params.alpha = best[0];
  fit.params.nu = nu;
  fit.params.mu = center + spread * prof.mu;
  fit.params.sigma = spread * prof.sigma;
  fit.objective = prof.objective * spread * spread;
  fit.converged = converged && std::isfinite(prof.objective);
  return fit;
}

}  // namespace qarspec
