#pragma once

// Special functions and distribution tails, implemented in-module.
// Absolute accuracy target ~1e-12 over the ranges used by the tests.

namespace geoprobe::dist {

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Regularized lower / upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double student_t_cdf(double t, double df);
double student_t_sf(double t, double df);
double chi2_sf(double x, double df);
double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace geoprobe::dist
