#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace sqmc::stats {

double mean(std::span<const double> x);
/// Unbiased sample variance; 0 for fewer than two values.
double variance(std::span<const double> x);
/// Standard error of the mean.
double standard_error(std::span<const double> x);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const { return lower <= v && v <= upper; }
};

struct RatioEstimate {
  double ratio = 0.0;
  Interval ci;
};

/// var(numerator) / var(denominator) with a percentile bootstrap interval;
/// the two samples are resampled independently.
RatioEstimate bootstrap_variance_ratio(std::span<const double> numerator,
                                       std::span<const double> denominator,
                                       std::size_t resamples, std::uint64_t seed,
                                       double level = 0.95);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);
/// Sup distance between the empirical CDF and U[0,1).
double ks_statistic_uniform(std::span<const double> x);
/// Asymptotic p-value with Stephens' small-sample correction.
double ks_pvalue(double statistic, double effective_n);
double ks_uniform_pvalue(std::span<const double> x);
double ks_two_sample_statistic(std::span<const double> a, std::span<const double> b);
double ks_two_sample_pvalue(std::span<const double> a, std::span<const double> b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace sqmc::stats
