#pragma once

namespace qarspec {

/// Standard normal CDF.
double normal_cdf(double x) noexcept;

/// Standard normal density.
double normal_pdf(double x) noexcept;

/**
 * Standard normal quantile. Acklam's rational approximation (relative error
 * below 1.2e-9) followed by one Halley correction against normal_cdf, which
 * brings the result to near machine precision. Returns -inf / +inf at 0 / 1
 * and NaN outside [0, 1].
 */
double normal_quantile(double p) noexcept;

}  // namespace qarspec
