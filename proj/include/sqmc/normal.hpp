#pragma once

#include <cmath>

namespace sqmc {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

/// Inverse of the standard normal CDF (Wichura's AS241, PPND16).
/// Throws std::domain_error unless 0 < p < 1.
double inverse_normal_cdf(double p);

double normal_cdf(double x);

inline double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

/// Density of N(mean, variance) at x.
double normal_pdf(double x, double mean, double variance);
double normal_log_pdf(double x, double mean, double variance);

}  // namespace sqmc
