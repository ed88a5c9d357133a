#include "sqmc/dpm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "sqmc/config.hpp"
#include "sqmc/normal.hpp"

namespace sqmc {

void DpmModel::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("DPM alpha must be positive");
  if (!(v0 > 0.0)) throw std::invalid_argument("DPM base variance v0 must be positive");
  if (!(kernel_var > 0.0)) throw std::invalid_argument("DPM kernel variance must be positive");
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw std::invalid_argument("Pitman-Yor discount must lie in [0,1)");
  }
}

DpmModel DpmModel::from_config(const KeyValueConfig& config) {
  DpmModel m;
  m.alpha = config.get_double("alpha", m.alpha);
  m.m0 = config.get_double("m0", m.m0);
  m.v0 = config.get_double("v0", m.v0);
  m.kernel_var = config.get_double("kernel_var", m.kernel_var);
  m.discount = config.get_double("discount", m.discount);
  m.validate();
  return m;
}

void DpmParticle::assign(std::size_t label, double y) {
  if (label == 0 || label > clusters.size() + 1) {
    throw std::out_of_range("cluster label " + std::to_string(label) + " out of range");
  }
  if (label == clusters.size() + 1) clusters.emplace_back();
  clusters[label - 1].add(y);
  allocations.push_back(static_cast<std::uint32_t>(label));
}

std::vector<std::uint32_t> canonical_labels(std::span<const std::uint32_t> labels) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;  // (old, new)
  std::vector<std::uint32_t> out;
  out.reserve(labels.size());
  for (auto l : labels) {
    std::uint32_t mapped = 0;
    for (const auto& [from, to] : seen) {
      if (from == l) mapped = to;
    }
    if (mapped == 0) {
      mapped = static_cast<std::uint32_t>(seen.size() + 1);
      seen.emplace_back(l, mapped);
    }
    out.push_back(mapped);
  }
  return out;
}

NormalPredictive cluster_predictive(const ClusterStats& stats, const DpmModel& model) {
  const double precision = 1.0 / model.v0 + static_cast<double>(stats.count) / model.kernel_var;
  const double post_var = 1.0 / precision;
  const double post_mean = post_var * (model.m0 / model.v0 + stats.sum / model.kernel_var);
  return {post_mean, post_var + model.kernel_var};
}

double marginal_k0(double y, const DpmModel& model) {
  if (!std::isfinite(y)) throw std::domain_error("non-finite observation");
  return normal_pdf(y, model.m0, model.v0 + model.kernel_var);
}

double marginal_kj(double y, const ClusterStats& stats, const DpmModel& model) {
  if (!std::isfinite(y)) throw std::domain_error("non-finite observation");
  const auto p = cluster_predictive(stats, model);
  return normal_pdf(y, p.mean, p.variance);
}

std::vector<double> predictive_masses(const DpmParticle& particle, double y, const DpmModel& model) {
  if (!std::isfinite(y)) throw std::domain_error("non-finite observation");
  const std::size_t k = particle.cluster_count();
  std::vector<double> m(k + 1);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& c = particle.clusters[j];
    m[j] = (static_cast<double>(c.count) - model.discount) * marginal_kj(y, c, model);
  }
  m[k] = (model.alpha + model.discount * static_cast<double>(k)) * marginal_k0(y, model);
  return m;
}

namespace {

std::vector<double> log_predictive_masses(const DpmParticle& particle, double y, const DpmModel& model) {
  if (!std::isfinite(y)) throw std::domain_error("non-finite observation");
  const std::size_t k = particle.cluster_count();
  std::vector<double> m(k + 1);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& c = particle.clusters[j];
    const auto pred = cluster_predictive(c, model);
    m[j] = std::log(static_cast<double>(c.count) - model.discount) +
           normal_log_pdf(y, pred.mean, pred.variance);
  }
  m[k] = std::log(model.alpha + model.discount * static_cast<double>(k)) +
         normal_log_pdf(y, model.m0, model.v0 + model.kernel_var);
  return m;
}

}  // namespace

std::vector<double> predictive_weights(const DpmParticle& particle, double y, const DpmModel& model) {
  // Normalized in log space so that far-out observations cannot underflow.
  auto p = log_predictive_masses(particle, y, model);
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (auto& v : p) total += v = std::exp(v - top);
  for (auto& v : p) v /= total;
  return p;
}

std::size_t gamma_discrete(std::span<const double> weights, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("gamma_discrete: u outside [0,1)");
  if (weights.empty()) throw std::invalid_argument("gamma_discrete: empty weights");
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    cumulative += weights[j];
    if (weights[j] > 0.0) last_positive = j;
    if (cumulative > u) return j + 1;
  }
  return last_positive + 1;
}

std::array<double, 2> particle_projection(const DpmParticle& particle, double y_next,
                                          const DpmModel& model) {
  const auto p = predictive_weights(particle, y_next, model);
  const std::size_t k = particle.cluster_count();
  double mean = p[k] * model.m0;
  for (std::size_t j = 0; j < k; ++j) {
    const double post_var = 1.0 / (1.0 / model.v0 + static_cast<double>(particle.clusters[j].count) / model.kernel_var);
    mean += p[j] * post_var * (model.m0 / model.v0 + particle.clusters[j].sum / model.kernel_var);
  }
  const double kd = static_cast<double>(k);
  return {logistic_unit(mean), kd / (kd + 1.0)};
}

DpmParticle DpmKernel::gamma(const DpmParticle& prev, std::span<const double> u, double y) const {
  const auto p = predictive_weights(prev, y, model_);
  DpmParticle next = prev;
  next.assign(gamma_discrete(p, u[0]), y);
  return next;
}

double DpmKernel::weight(const DpmParticle& prev, const DpmParticle&, double y) const {
  double total = 0.0;
  for (double m : predictive_masses(prev, y, model_)) total += m;
  return total / (model_.alpha + static_cast<double>(prev.time()));
}

std::string to_string(FilterEngine e) { return e == FilterEngine::SMC ? "smc" : "sqmc"; }

FilterEngine filter_engine_from_string(const std::string& name) {
  if (name == "smc") return FilterEngine::SMC;
  if (name == "sqmc") return FilterEngine::SQMC;
  throw std::invalid_argument("unknown filter engine '" + name + "'");
}

double DpmResult::predictive_density(double y) const {
  double density = 0.0;
  for (std::size_t n = 0; n < system.size(); ++n) {
    const auto& x = system.states[n];
    double total = 0.0;
    for (double m : predictive_masses(x, y, model)) total += m;
    density += system.weights[n] * total / (model.alpha + static_cast<double>(x.time()));
  }
  return density;
}

namespace {

// P(k_T = j) from the weighted histories at T - 1, summing each particle's
// urn options exactly instead of sampling one (a Rao-Blackwellized form of
// the weighted histogram of k_T).
std::vector<double> final_k_posterior(const ParticleSystem<DpmParticle>& before, double y,
                                      const DpmModel& model) {
  std::vector<double> post;
  std::vector<double> log_w(before.size());
  std::vector<std::vector<double>> log_m(before.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < before.size(); ++n) {
    log_m[n] = log_predictive_masses(before.states[n], y, model);
    for (double v : log_m[n]) top = std::max(top, v);
  }
  double total = 0.0;
  for (std::size_t n = 0; n < before.size(); ++n) {
    const std::size_t k = before.states[n].cluster_count();
    if (post.size() < k + 2) post.resize(k + 2, 0.0);
    for (std::size_t o = 0; o <= k; ++o) {
      const double mass = before.weights[n] * std::exp(log_m[n][o] - top);
      post[o < k ? k : k + 1] += mass;
      total += mass;
    }
  }
  if (!(total > 0.0)) throw ParticleDegeneracy(before.step + 1);
  for (auto& p : post) p /= total;
  return post;
}

}  // namespace

DpmResult run_dpm_filter(std::span<const double> data, const DpmModel& model,
                         const DpmFilterOptions& options) {
  if (options.particles < 2) throw std::invalid_argument("run_dpm_filter requires N >= 2");
  if (data.empty()) throw std::invalid_argument("run_dpm_filter requires data");
  const DpmKernel kernel(model);
  DpmResult result;
  result.model = model;
  result.system = ParticleSystem<DpmParticle>::uniform(
      std::vector<DpmParticle>(options.particles));

  if (options.engine == FilterEngine::SQMC) {
    const HilbertMap hilbert(2, options.hilbert_order);
    const auto project = [&model](const DpmParticle& x, double y, std::span<double> out) {
      const auto key = particle_projection(x, y, model);
      out[0] = key[0];
      out[1] = key[1];
    };
    for (std::size_t t = 0; t < data.size(); ++t) {
      if (t + 1 == data.size()) result.k_posterior = final_k_posterior(result.system, data[t], model);
      StreamConfig sc;
      sc.dim = 2;
      sc.randomization = options.randomization;
      sc.seed = derive_seed(options.seed, t);
      RqmcStream stream(sc);
      sqmc_step(result.system, kernel, data[t], stream, hilbert, project);
      result.log_evidence_path.push_back(result.system.log_norm_const);
    }
  } else {
    std::mt19937_64 rng(mix64(options.seed));
    for (std::size_t t = 0; t < data.size(); ++t) {
      if (t + 1 == data.size()) result.k_posterior = final_k_posterior(result.system, data[t], model);
      const double y = data[t];
      smc_step(result.system, kernel, y, rng, options.resampler);
      result.log_evidence_path.push_back(result.system.log_norm_const);
    }
  }

  result.log_evidence = result.system.log_norm_const;
  return result;
}

}  // namespace sqmc
