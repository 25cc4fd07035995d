#pragma once

namespace concordia {

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution, Q(df/2, x/2).
double chi_square_tail(double x, double df);

// Standard normal upper tail and quantile.
double normal_upper_tail(double z);
double normal_quantile(double p);

}  // namespace concordia
