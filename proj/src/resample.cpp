#include "sqmc/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqmc {
namespace {

std::vector<double> cumulative_sum(std::span<const double> w) {
  std::vector<double> c(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) c[i] = acc += w[i];
  return c;
}

void require_unit_interval(std::span<const double> uniforms) {
  for (double u : uniforms) {
    if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("resampling uniform outside [0,1)");
  }
}

}  // namespace

std::string to_string(Resampler r) {
  switch (r) {
    case Resampler::Multinomial: return "multinomial";
    case Resampler::Systematic: return "systematic";
    case Resampler::Residual: return "residual";
  }
  return "multinomial";
}

Resampler resampler_from_string(const std::string& name) {
  if (name == "multinomial") return Resampler::Multinomial;
  if (name == "systematic") return Resampler::Systematic;
  if (name == "residual") return Resampler::Residual;
  throw std::invalid_argument("unknown resampler '" + name + "'");
}

void require_normalized(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("weights must be finite and >= 0");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("weights not normalized (sum = " + std::to_string(total) + ")");
  }
}

std::size_t inverse_cdf_index(std::span<const double> cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it != cumulative.end()) return static_cast<std::size_t>(it - cumulative.begin());
  // u >= total mass through rounding: last index that carries mass.
  std::size_t i = cumulative.size() - 1;
  while (i > 0 && cumulative[i] == cumulative[i - 1]) --i;
  return i;
}

double effective_sample_size(std::span<const double> weights) {
  double s2 = 0.0;
  for (double w : weights) s2 += w * w;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

AncestorIndices multinomial_resample(std::span<const double> weights,
                                     std::span<const double> uniforms) {
  require_normalized(weights);
  require_unit_interval(uniforms);
  const auto cdf = cumulative_sum(weights);
  AncestorIndices a(uniforms.size());
  for (std::size_t i = 0; i < uniforms.size(); ++i) a[i] = inverse_cdf_index(cdf, uniforms[i]);
  return a;
}

AncestorIndices systematic_resample(std::span<const double> weights, double u) {
  require_normalized(weights);
  if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("systematic uniform outside [0,1)");
  const auto cdf = cumulative_sum(weights);
  const std::size_t n = weights.size();
  AncestorIndices a(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double point = (u + static_cast<double>(k)) / static_cast<double>(n);
    while (j + 1 < n && !(cdf[j] > point)) ++j;
    a[k] = j;
  }
  // Points past a rounded-down total land on the last index with mass.
  for (auto& idx : a) {
    while (idx > 0 && weights[idx] == 0.0) --idx;
  }
  return a;
}

AncestorIndices residual_resample(std::span<const double> weights,
                                  std::span<const double> uniforms) {
  require_normalized(weights);
  const std::size_t n = weights.size();
  AncestorIndices a;
  a.reserve(n);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double expected = static_cast<double>(n) * weights[i];
    const auto copies = static_cast<std::size_t>(std::floor(expected + 1e-9));
    a.insert(a.end(), copies, i);
    residual[i] = std::max(0.0, expected - static_cast<double>(copies));
  }
  if (a.size() > n) a.resize(n);
  const std::size_t remaining = n - a.size();
  if (remaining == 0) return a;
  if (uniforms.size() < remaining) {
    throw std::invalid_argument("residual resampling needs " + std::to_string(remaining) +
                                " uniforms");
  }
  require_unit_interval(uniforms.first(remaining));
  double total = 0.0;
  for (double r : residual) total += r;
  if (total <= 0.0) residual.assign(weights.begin(), weights.end()), total = 1.0;
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) cdf[i] = acc += residual[i] / total;
  for (std::size_t k = 0; k < remaining; ++k) a.push_back(inverse_cdf_index(cdf, uniforms[k]));
  return a;
}

AncestorIndices resample(Resampler scheme, std::span<const double> weights,
                         std::span<const double> uniforms) {
  switch (scheme) {
    case Resampler::Multinomial: return multinomial_resample(weights, uniforms);
    case Resampler::Systematic:
      if (uniforms.empty()) throw std::invalid_argument("systematic resampling needs a uniform");
      return systematic_resample(weights, uniforms[0]);
    case Resampler::Residual: return residual_resample(weights, uniforms);
  }
  throw std::invalid_argument("unknown resampler");
}

AncestorIndices sqmc_resample(std::span<const double> weights,
                              std::span<const double> projected,
                              const HilbertMap& hilbert,
                              std::span<const double> sorted_uniforms) {
  require_normalized(weights);
  require_unit_interval(sorted_uniforms);
  if (!std::is_sorted(sorted_uniforms.begin(), sorted_uniforms.end())) {
    throw std::invalid_argument("sqmc_resample requires ascending uniforms");
  }
  const std::size_t n = weights.size();
  if (projected.size() != n * hilbert.dimension()) {
    throw std::invalid_argument("projected states do not match the weight vector");
  }
  const auto order = hilbert.sort_by_curve(projected);
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) cdf[k] = acc += weights[order[k]];

  AncestorIndices a(sorted_uniforms.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < sorted_uniforms.size(); ++i) {
    while (k + 1 < n && !(cdf[k] > sorted_uniforms[i])) ++k;
    std::size_t pick = k;
    while (pick > 0 && weights[order[pick]] == 0.0) --pick;
    a[i] = order[pick];
  }
  return a;
}

std::vector<std::size_t> offspring_counts(const AncestorIndices& ancestors, std::size_t n) {
  std::vector<std::size_t> counts(n, 0);
  for (auto a : ancestors) {
    if (a >= n) throw std::out_of_range("ancestor index out of range");
    ++counts[a];
  }
  return counts;
}

}  // namespace sqmc
