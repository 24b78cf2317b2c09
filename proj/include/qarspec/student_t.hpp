#pragma once

namespace qarspec {

/// Regularized incomplete beta I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

double student_t_pdf(double x, double nu);
double student_t_cdf(double x, double nu);

}  // namespace qarspec
