#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sqmc/hilbert.hpp"

namespace sqmc {

using AncestorIndices = std::vector<std::size_t>;

enum class Resampler { Multinomial, Systematic, Residual };

std::string to_string(Resampler r);
Resampler resampler_from_string(const std::string& name);

/// Throws std::invalid_argument unless weights are finite, non-negative and
/// sum to one within 1e-9.
void require_normalized(std::span<const double> weights);

/// Smallest index whose cumulative weight strictly exceeds u. When rounding
/// leaves u at or above the total, the last index with positive mass.
std::size_t inverse_cdf_index(std::span<const double> cumulative, double u);

/// 1 / sum w_i^2.
double effective_sample_size(std::span<const double> weights);

/// One ancestor per uniform, by inverse CDF of the weight vector.
AncestorIndices multinomial_resample(std::span<const double> weights,
                                     std::span<const double> uniforms);

/// Single uniform u on the grid (u + k) / N.
AncestorIndices systematic_resample(std::span<const double> weights, double u);

/// floor(N w_i) deterministic copies, remainder by multinomial on the
/// residual weights using the first R uniforms.
AncestorIndices residual_resample(std::span<const double> weights,
                                  std::span<const double> uniforms);

/// Dispatch for the pseudorandom baselines; consumes N uniforms (systematic
/// uses only the first).
AncestorIndices resample(Resampler scheme, std::span<const double> weights,
                         std::span<const double> uniforms);

/// SQMC resampling on already-projected states (row-major N x d points in
/// [0,1)^d): Hilbert-sort the particles, then inverse CDF of the sorted
/// weights at ascending uniforms. Ancestors use the original numbering.
AncestorIndices sqmc_resample(std::span<const double> weights,
                              std::span<const double> projected,
                              const HilbertMap& hilbert,
                              std::span<const double> sorted_uniforms);

/// Per-index copy counts of an ancestor vector.
std::vector<std::size_t> offspring_counts(const AncestorIndices& ancestors, std::size_t n);

}  // namespace sqmc
