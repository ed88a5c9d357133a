#include "sqmc/stats.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "sqmc/random.hpp"

namespace sqmc::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double standard_error(std::span<const double> x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

RatioEstimate bootstrap_variance_ratio(std::span<const double> numerator,
                                       std::span<const double> denominator,
                                       std::size_t resamples, std::uint64_t seed, double level) {
  if (numerator.size() < 2 || denominator.size() < 2) {
    throw std::invalid_argument("variance ratio needs at least two values per sample");
  }
  RatioEstimate est;
  est.ratio = variance(numerator) / variance(denominator);
  std::mt19937_64 rng(mix64(seed));
  std::vector<double> ratios;
  ratios.reserve(resamples);
  std::vector<double> a(numerator.size()), b(denominator.size());
  std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1), pick_b(0, b.size() - 1);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& v : a) v = numerator[pick_a(rng)];
    for (auto& v : b) v = denominator[pick_b(rng)];
    const double vb = variance(b);
    ratios.push_back(vb > 0.0 ? variance(a) / vb : std::numeric_limits<double>::infinity());
  }
  std::sort(ratios.begin(), ratios.end());
  const double tail = 0.5 * (1.0 - level);
  const auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(ratios.size() - 1)));
    return ratios[std::min(idx, ratios.size() - 1)];
  };
  est.ci = {at(tail), at(1.0 - tail)};
  return est;
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_statistic_uniform(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("KS statistic of an empty sample");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    d = std::max({d, static_cast<double>(i + 1) / n - s[i], s[i] - static_cast<double>(i) / n});
  }
  return d;
}

double ks_pvalue(double statistic, double effective_n) {
  const double sn = std::sqrt(effective_n);
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * statistic);
}

double ks_uniform_pvalue(std::span<const double> x) {
  return ks_pvalue(ks_statistic_uniform(x), static_cast<double>(x.size()));
}

double ks_two_sample_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS statistic of an empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double ks_two_sample_pvalue(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  return ks_pvalue(ks_two_sample_statistic(a, b), n * m / (n + m));
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("least squares needs at least two paired points");
  }
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("least squares with constant abscissa");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace sqmc::stats
