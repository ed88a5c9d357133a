#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqmc/qseq.hpp"
#include "sqmc/random.hpp"

namespace sqmc {

class KeyValueConfig;

/// Scalar prior with evaluable density and inverse CDF on (lower, upper).
struct Prior {
  double lower = 0.0;
  double upper = 1.0;
  std::function<double(double)> density;
  std::function<double(double)> inverse_cdf;
  double variance = 1.0 / 12.0;

  static Prior uniform(double a, double b);
  bool in_support(double theta) const { return theta > lower && theta < upper; }
};

/// Two-level hidden Markov switching model: x_1 uniform on {-level, +level},
/// x_{k+1} = -x_k with probability theta, y_k = x_k + sigma_obs * noise.
struct HmsModel {
  double sigma_obs = 0.5;
  std::size_t length = 100;
  double level = 2.0;

  void validate() const;
};

/// Throws std::domain_error unless 0 < theta < 1.
std::vector<double> simulate_hms(double theta, const HmsModel& model, std::mt19937_64& rng);

/// (lag-1 autocorrelation, mean |y|). The autocorrelation is the Pearson
/// correlation of (y_1..y_{n-1}) with (y_2..y_n), and 0 when either has zero
/// spread. Requires at least two observations.
std::vector<double> default_summary(std::span<const double> y);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// The ceil(q M)-th order statistic (1-based, no interpolation).
double adaptive_epsilon(std::span<const double> distances, double q);

using Simulator = std::function<std::vector<double>(double theta, std::mt19937_64& rng)>;
using SummaryFn = std::function<std::vector<double>(std::span<const double>)>;
using DistanceFn = std::function<double(std::span<const double>, std::span<const double>)>;

struct AbcConfig {
  std::size_t particles = 256;
  std::size_t iterations = 5;
  /// Explicit thresholds, strictly decreasing, one per iteration. Ignored
  /// when `quantile` > 0.
  std::vector<double> epsilons;
  /// Adaptive mode: epsilon_t is the q-quantile of `pilot` distances drawn
  /// from the iteration's proposal (capped by the previous threshold).
  double quantile = 0.0;
  std::size_t pilot = 0;
  Prior prior = Prior::uniform(0.0, 1.0);
  Simulator simulator;
  SummaryFn summary = default_summary;
  DistanceFn distance = euclidean_distance;
  std::size_t max_attempts_per_particle = 100000;

  void validate() const;
};

/// Default thresholds for the switching-model toy: (2, 1, 0.6, 0.5, 0.45),
/// keeping the last `iterations` entries, extended geometrically (x0.9).
std::vector<double> default_hms_epsilons(std::size_t iterations);

/// Toy configuration for the switching model: uniform(0,1) prior, default
/// summary, Euclidean distance. Keys: N, T, epsilons, quantile, pilot,
/// sigma_obs, length, max_attempts.
AbcConfig hms_abc_config(const KeyValueConfig& config, const HmsModel& model);
HmsModel hms_model_from_config(const KeyValueConfig& config);

struct AbcPopulation {
  std::vector<double> thetas;
  std::vector<double> omegas;
  std::vector<std::size_t> particle_attempts;
  double sigma = 0.0;  // kernel variance
  double epsilon = 0.0;
  std::size_t t = 0;
  std::size_t attempts = 0;
  std::size_t simulator_calls = 0;

  std::size_t size() const { return thetas.size(); }
  double acceptance_rate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(size()) / static_cast<double>(attempts);
  }
};

/// Wall-clock split of a run, milliseconds.
struct AbcTimings {
  double sequence_ms = 0.0;
  double resample_ms = 0.0;
  double simulate_ms = 0.0;
};

class AttemptBudgetExceeded : public std::runtime_error {
 public:
  AttemptBudgetExceeded(std::size_t t, std::size_t accepted, std::size_t attempts);
  std::size_t iteration() const { return t_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t t_, accepted_, attempts_;
};

/// First iteration: theta = F^{-1}(u_j) from one shared 1-D sequence (j runs
/// across all particles and rejections), accepted when rho <= epsilon.
/// Sigma_1 is twice the unbiased empirical variance.
AbcPopulation init_population(const AbcConfig& config, std::span<const double> observed_summary,
                              double epsilon, UniformSource& stream, std::mt19937_64& sim_rng,
                              AbcTimings* timings = nullptr);

/// Iteration t >= 2 from a shared 2-D sequence (u_j, v_j): v_j picks an
/// ancestor by inverse CDF over the theta-sorted population, u_j perturbs
/// it with a Gaussian of variance Sigma_{t-1}. Out-of-support proposals
/// count as rejections without a simulator call.
AbcPopulation move_population(const AbcPopulation& previous, const AbcConfig& config,
                              std::span<const double> observed_summary, double epsilon,
                              UniformSource& stream, std::mt19937_64& sim_rng,
                              AbcTimings* timings = nullptr);

/// s_i = sum_j w_j phi((x_i - y_j) / scale) for every target x_i. Small
/// source sets are summed directly; larger ones use a truncated Taylor
/// expansion of the Gaussian about clusters of sorted sources (cluster
/// width <= scale / 2, 24 terms). Clusters more than 9.25 scale beyond the
/// nearest one are ignored and clusters further than 6 scale from the
/// target are summed directly, which keeps the relative error below 1e-12.
std::vector<double> gaussian_kernel_sums(std::span<const double> targets,
                                         std::span<const double> sources,
                                         std::span<const double> weights, double scale);

/// Unnormalized importance weight pi(theta) / sum_j w_j phi((theta - theta_j) / sqrt(Sigma)).
double population_weight(double theta, const AbcPopulation& previous, const Prior& prior);

/// 2 x unbiased variance (n - 1 denominator).
double twice_empirical_variance(std::span<const double> values);
/// 2 x weighted variance with the 1 / (1 - sum w^2) reliability correction.
double twice_weighted_variance(std::span<const double> values, std::span<const double> weights);

enum class AbcEngine { PQMC, PlainMC };
std::string to_string(AbcEngine e);
AbcEngine abc_engine_from_string(const std::string& name);

struct AbcRunOptions {
  AbcEngine engine = AbcEngine::PQMC;
  std::uint64_t seed = 0;
  Randomization randomization = Randomization::DigitalShift;
  GenerationMode mode = GenerationMode::Incremental;
  /// Run the PQMC path with pseudorandom uniforms (engine-parity control).
  bool pseudorandom_uniforms = false;
};

struct AbcResult {
  std::vector<AbcPopulation> history;
  std::vector<double> epsilons;
  std::vector<double> acceptance_rates;
  double posterior_mean = 0.0;
  double posterior_var = 0.0;
  std::size_t total_simulator_calls = 0;
  AbcTimings timings;

  const AbcPopulation& final_population() const { return history.back(); }
};

AbcResult run_abc(const AbcConfig& config, std::span<const double> observed,
                  const AbcRunOptions& options);

}  // namespace sqmc
