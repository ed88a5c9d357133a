#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sqmc/qseq.hpp"
#include "sqmc/resample.hpp"
#include "sqmc/smc.hpp"

namespace sqmc {

class KeyValueConfig;

/// Normal kernel with known variance, Normal base measure, Dirichlet
/// (discount = 0) or Pitman-Yor urn.
struct DpmModel {
  double alpha = 1.0;
  double m0 = 0.0;
  double v0 = 1.0;
  double kernel_var = 1.0;
  double discount = 0.0;

  /// Throws std::invalid_argument on alpha <= 0, v0 <= 0, kernel_var <= 0 or
  /// discount outside [0,1).
  void validate() const;
  /// Keys: alpha, m0, v0, kernel_var, discount.
  static DpmModel from_config(const KeyValueConfig& config);
};

struct ClusterStats {
  std::size_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double y) {
    ++count;
    sum += y;
    sum_sq += y * y;
  }
};

/// Allocation history x_{1:t} with per-cluster sufficient statistics.
/// Labels are 1-based and numbered by first appearance.
struct DpmParticle {
  std::vector<std::uint32_t> allocations;
  std::vector<ClusterStats> clusters;

  std::size_t time() const { return allocations.size(); }
  std::size_t cluster_count() const { return clusters.size(); }

  /// Allocate y to `label` in 1..k+1 (k + 1 opens a new cluster).
  void assign(std::size_t label, double y);
};

/// Relabel by order of first appearance.
std::vector<std::uint32_t> canonical_labels(std::span<const std::uint32_t> labels);

struct NormalPredictive {
  double mean;
  double variance;
};

/// Posterior predictive of a cluster's next observation (conjugate update).
/// An empty cluster gives the prior predictive N(m0, v0 + kernel_var).
NormalPredictive cluster_predictive(const ClusterStats& stats, const DpmModel& model);

/// K_0(y): N(y; m0, v0 + kernel_var).
double marginal_k0(double y, const DpmModel& model);
/// K_j(y | cluster).
double marginal_kj(double y, const ClusterStats& stats, const DpmModel& model);

/// Unnormalized urn masses: (n_j - discount) K_j(y) for existing clusters and
/// (alpha + discount k) K_0(y) for a new one. Throws on non-finite y.
std::vector<double> predictive_masses(const DpmParticle& particle, double y, const DpmModel& model);

/// predictive_masses normalized to a probability vector of length k + 1
/// (computed in log space, so it never underflows).
std::vector<double> predictive_weights(const DpmParticle& particle, double y, const DpmModel& model);

/// min{ j : p_1 + ... + p_j > u }, 1-based. Throws std::domain_error for u
/// outside [0,1).
std::size_t gamma_discrete(std::span<const double> weights, double u);

/// Hilbert sort key of a discrete history: (logistic of the predictive mean
/// of y_next, k / (k + 1)).
std::array<double, 2> particle_projection(const DpmParticle& particle, double y_next,
                                          const DpmModel& model);

/// Transition kernel over allocation histories. The proposal is the urn
/// predictive, so the incremental weight is its normalizer divided by
/// (alpha + t - 1), i.e. p(y_t | x_{1:t-1}, y_{1:t-1}).
class DpmKernel {
 public:
  using State = DpmParticle;
  using Observation = double;

  explicit DpmKernel(DpmModel model) : model_(model) { model_.validate(); }

  std::size_t u_dim() const { return 1; }
  DpmParticle gamma(const DpmParticle& prev, std::span<const double> u, double y) const;
  double weight(const DpmParticle& prev, const DpmParticle& next, double y) const;

 private:
  DpmModel model_;
};

enum class FilterEngine { SMC, SQMC };
std::string to_string(FilterEngine e);
FilterEngine filter_engine_from_string(const std::string& name);

struct DpmFilterOptions {
  std::size_t particles = 1024;
  FilterEngine engine = FilterEngine::SQMC;
  std::uint64_t seed = 0;
  Resampler resampler = Resampler::Multinomial;      // SMC only
  Randomization randomization = Randomization::DigitalShift;  // SQMC only
  unsigned hilbert_order = 31;
};

struct DpmResult {
  DpmModel model;
  ParticleSystem<DpmParticle> system;
  /// P(k_T = j) at index j: the weighted particles at T - 1 with every urn
  /// option for y_T summed exactly.
  std::vector<double> k_posterior;
  double log_evidence = 0.0;
  /// log evidence after each of the T steps.
  std::vector<double> log_evidence_path;

  /// Estimated predictive density of the next observation.
  double predictive_density(double y) const;
};

/// Runs the Polya-urn particle filter over `data`. Requires N >= 2 and
/// nonempty data; throws ParticleDegeneracy on total weight collapse.
DpmResult run_dpm_filter(std::span<const double> data, const DpmModel& model,
                         const DpmFilterOptions& options);

}  // namespace sqmc
