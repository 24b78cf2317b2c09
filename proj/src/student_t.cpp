#include "qarspec/student_t.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "qarspec/error.hpp"

namespace qarspec {

namespace {

using DoublePolicy =
    boost::math::policies::policy<boost::math::policies::promote_double<false>>;

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ParameterError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ParameterError("incomplete beta needs x in [0, 1]");
  return boost::math::ibeta(a, b, x, DoublePolicy());
}

double student_t_pdf(double x, double nu) {
  if (!(nu > 0.0)) throw ParameterError("degrees of freedom must be positive");
  // Gamma((nu+1)/2) / Gamma(nu/2) without cancellation at large nu.
  const double ratio = 1.0 / boost::math::tgamma_delta_ratio(0.5 * nu, 0.5, DoublePolicy());
  const double norm = ratio / std::sqrt(nu * std::numbers::pi);
  return norm * std::exp(-0.5 * (nu + 1.0) * std::log1p(x * x / nu));
}

double student_t_cdf(double x, double nu) {
  if (!(nu > 0.0)) throw ParameterError("degrees of freedom must be positive");
  if (std::isnan(x)) throw ParameterError("student t cdf of NaN");
  if (std::isinf(x)) return x > 0.0 ? 1.0 : 0.0;
  const double x2 = x * x;
  if (x2 < nu) {
    const double half = 0.5 * boost::math::ibeta(0.5, 0.5 * nu, x2 / (nu + x2), DoublePolicy());
    return x >= 0.0 ? 0.5 + half : 0.5 - half;
  }
  const double tail = 0.5 * boost::math::ibeta(0.5 * nu, 0.5, nu / (nu + x2), DoublePolicy());
  return x >= 0.0 ? 1.0 - tail : tail;
}

}  // namespace qarspec
