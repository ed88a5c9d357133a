#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sqmc/hilbert.hpp"
#include "sqmc/random.hpp"
#include "sqmc/resample.hpp"

namespace sqmc {

/// N weighted particles plus the running log normalizing-constant estimate.
template <class State>
struct ParticleSystem {
  std::vector<State> states;
  std::vector<double> weights;
  double log_norm_const = 0.0;
  std::size_t step = 0;

  static ParticleSystem uniform(std::vector<State> initial) {
    ParticleSystem s;
    const auto n = initial.size();
    if (n == 0) throw std::invalid_argument("particle system needs at least one particle");
    s.states = std::move(initial);
    s.weights.assign(n, 1.0 / static_cast<double>(n));
    return s;
  }

  std::size_t size() const { return states.size(); }
};

/// All particle weights vanished (or became non-finite) at `step`.
class ParticleDegeneracy : public std::runtime_error {
 public:
  explicit ParticleDegeneracy(std::size_t step)
      : std::runtime_error("particle degeneracy: total weight is zero at step " +
                           std::to_string(step)),
        step_(step) {}
  std::size_t step_index() const { return step_; }

 private:
  std::size_t step_;
};

/// x_t = gamma(x_{t-1}, u_t, y_t) with u_t in [0,1)^{u_dim}, reweighted by
/// weight(x_{t-1}, x_t, y_t) >= 0. gamma must be a pure function.
template <class K>
concept TransitionKernel =
    requires(const K& k, const typename K::State& x, std::span<const double> u,
             const typename K::Observation& y) {
      { k.u_dim() } -> std::convertible_to<std::size_t>;
      { k.gamma(x, u, y) } -> std::convertible_to<typename K::State>;
      { k.weight(x, x, y) } -> std::convertible_to<double>;
    };

/// Maps a particle (and the upcoming observation) into [0,1)^d for Hilbert
/// sorting, writing d coordinates into `out`.
template <class P, class State, class Obs>
concept Projection = std::invocable<const P&, const State&, const Obs&, std::span<double>>;

namespace detail {

/// Replaces the incremental weights `w` by the normalized products
/// prev_n * w_n and returns the log of sum_n prev_n * w_n.
inline double absorb_weights(std::vector<double>& w, std::span<const double> prev,
                             std::size_t step) {
  double total = 0.0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    if (!(w[n] >= 0.0) || !std::isfinite(w[n])) throw ParticleDegeneracy(step);
    w[n] *= prev[n];
    total += w[n];
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw ParticleDegeneracy(step);
  for (auto& x : w) x /= total;
  return std::log(total);
}

}  // namespace detail

/// SQMC resampling with a projection of the particle states.
template <class State, class Obs, class Project>
  requires Projection<Project, State, Obs>
AncestorIndices sqmc_resample(std::span<const double> weights, std::span<const State> states,
                              const Obs& observation, const HilbertMap& hilbert,
                              const Project& project, std::span<const double> sorted_uniforms) {
  const std::size_t d = hilbert.dimension();
  std::vector<double> projected(states.size() * d);
  for (std::size_t n = 0; n < states.size(); ++n) {
    project(states[n], observation, std::span<double>(projected.data() + n * d, d));
  }
  return sqmc_resample(weights, projected, hilbert, sorted_uniforms);
}

/// One SQMC step: N points of dimension 1 + u_dim from `stream`, sorted by
/// their first coordinate, which selects ancestors over the Hilbert-sorted
/// particles; the remaining coordinates drive gamma. Resamples every step.
template <TransitionKernel K, class Project>
  requires Projection<Project, typename K::State, typename K::Observation>
void sqmc_step(ParticleSystem<typename K::State>& system, const K& kernel,
               const typename K::Observation& observation, UniformSource& stream,
               const HilbertMap& hilbert, const Project& project) {
  const std::size_t n = system.size();
  const std::size_t dim = 1 + kernel.u_dim();
  if (stream.dimension() != dim) {
    throw std::invalid_argument("sqmc_step: stream dimension must be 1 + u_dim");
  }
  std::vector<double> points(n * dim);
  for (std::size_t i = 0; i < n; ++i) stream.next(std::span<double>(points.data() + i * dim, dim));
  std::vector<std::size_t> by_first(n);
  std::iota(by_first.begin(), by_first.end(), std::size_t{0});
  std::stable_sort(by_first.begin(), by_first.end(),
                   [&](std::size_t a, std::size_t b) { return points[a * dim] < points[b * dim]; });
  std::vector<double> first(n);
  for (std::size_t i = 0; i < n; ++i) first[i] = points[by_first[i] * dim];

  const auto ancestors = sqmc_resample(std::span<const double>(system.weights),
                                       std::span<const typename K::State>(system.states),
                                       observation, hilbert, project, first);
  ++system.step;
  std::vector<typename K::State> next;
  next.reserve(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& parent = system.states[ancestors[i]];
    const std::span<const double> u(points.data() + by_first[i] * dim + 1, dim - 1);
    next.push_back(kernel.gamma(parent, u, observation));
    w[i] = kernel.weight(parent, next.back(), observation);
  }
  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  system.log_norm_const += detail::absorb_weights(w, uniform, system.step);
  system.states = std::move(next);
  system.weights = std::move(w);
}

/// Plain SMC step with pseudorandom uniforms. Resamples with `scheme` only
/// when the effective sample size drops below N/2.
/// Returns true when resampling took place.
template <TransitionKernel K>
bool smc_step(ParticleSystem<typename K::State>& system, const K& kernel,
              const typename K::Observation& observation, std::mt19937_64& rng,
              Resampler scheme) {
  const std::size_t n = system.size();
  const bool resampled = effective_sample_size(system.weights) < 0.5 * static_cast<double>(n);
  std::vector<typename K::State> parents;
  std::vector<double> prev;
  if (resampled) {
    std::vector<double> uniforms(n);
    for (auto& u : uniforms) u = uniform32(rng);
    const auto ancestors = resample(scheme, system.weights, uniforms);
    parents.reserve(n);
    for (auto a : ancestors) parents.push_back(system.states[a]);
    prev.assign(n, 1.0 / static_cast<double>(n));
  } else {
    parents = std::move(system.states);
    prev = std::move(system.weights);
  }
  ++system.step;
  std::vector<double> u(kernel.u_dim());
  std::vector<typename K::State> next;
  next.reserve(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : u) x = uniform32(rng);
    next.push_back(kernel.gamma(parents[i], u, observation));
    w[i] = kernel.weight(parents[i], next.back(), observation);
  }
  system.log_norm_const += detail::absorb_weights(w, prev, system.step);
  system.states = std::move(next);
  system.weights = std::move(w);
  return resampled;
}

/// 1 / (1 + exp(-(x - location) / scale)), kept strictly below 1.
inline double logistic_unit(double x, double location = 0.0, double scale = 1.0) {
  const double v = 1.0 / (1.0 + std::exp(-(x - location) / scale));
  return std::min(v, std::nextafter(1.0, 0.0));
}

/// Weighted mean and standard deviation of a scalar feature; the scale is
/// floored at `min_scale`.
inline std::pair<double, double> weighted_location_scale(std::span<const double> values,
                                                         std::span<const double> weights,
                                                         double min_scale = 1e-12) {
  double mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) mean += weights[i] * values[i];
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    var += weights[i] * (values[i] - mean) * (values[i] - mean);
  }
  return {mean, std::max(std::sqrt(var), min_scale)};
}

// CSV dumps -----------------------------------------------------------------

/// Header for particle dumps: replicate,t,particle,weight,<state columns>.
inline void write_particle_header(std::ostream& out, std::span<const std::string> state_columns) {
  out << "replicate,t,particle,weight";
  for (const auto& c : state_columns) out << ',' << c;
  out << '\n';
}

/// One row per particle; `write_state` emits the comma-separated state fields.
template <class State, class WriteState>
void write_particles(std::ostream& out, std::size_t replicate, const ParticleSystem<State>& system,
                     const WriteState& write_state) {
  for (std::size_t n = 0; n < system.size(); ++n) {
    out << replicate << ',' << system.step << ',' << n << ',' << system.weights[n] << ',';
    write_state(out, system.states[n]);
    out << '\n';
  }
}

inline void write_evidence_header(std::ostream& out) { out << "replicate,t,log_norm_const\n"; }

template <class State>
void write_evidence(std::ostream& out, std::size_t replicate, const ParticleSystem<State>& system) {
  out << replicate << ',' << system.step << ',' << system.log_norm_const << '\n';
}

}  // namespace sqmc
