#pragma once

namespace motiv {

/// Standard normal CDF.
double normal_cdf(double z);

/// Upper-tail survival function of a chi-squared with `dof` degrees of
/// freedom (regularized incomplete gamma).
double chi2_sf(double x, double dof);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

}  // namespace motiv
