#include "sqmc/abc.hpp"

#include <algorithm>
#include <chrono>
#include <iterator>
#include <limits>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <array>

#include "sqmc/config.hpp"
#include "sqmc/normal.hpp"
#include "sqmc/resample.hpp"

namespace sqmc {
namespace {

using Clock = std::chrono::steady_clock;

class ScopedTimer {
 public:
  explicit ScopedTimer(double* sink) : sink_(sink), start_(sink ? Clock::now() : Clock::time_point{}) {}
  ~ScopedTimer() {
    if (sink_) *sink_ += std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
  }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  double* sink_;
  Clock::time_point start_;
};

double* slot(AbcTimings* t, double AbcTimings::*member) { return t ? &(t->*member) : nullptr; }

double simulated_distance(const AbcConfig& config, double theta,
                          std::span<const double> observed_summary, std::mt19937_64& rng,
                          AbcTimings* timings) {
  ScopedTimer timer(slot(timings, &AbcTimings::simulate_ms));
  const auto z = config.simulator(theta, rng);
  const auto s = config.summary(z);
  return config.distance(s, observed_summary);
}

void draw(UniformSource& stream, std::span<double> out, AbcTimings* timings) {
  ScopedTimer timer(slot(timings, &AbcTimings::sequence_ms));
  stream.next(out);
}

// Inverse CDF over the theta-sorted previous population.
struct SortedAncestors {
  std::vector<std::size_t> order;
  std::vector<double> cdf;

  explicit SortedAncestors(const AbcPopulation& pop) : order(pop.size()), cdf(pop.size()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return pop.thetas[a] < pop.thetas[b];
    });
    double acc = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) cdf[k] = acc += pop.omegas[order[k]];
  }

  std::size_t pick(double v) const { return order[inverse_cdf_index(cdf, v)]; }
};

double propose(const AbcPopulation& previous, const SortedAncestors& ancestors, double u, double v) {
  const double parent = previous.thetas[ancestors.pick(v)];
  return parent + std::sqrt(previous.sigma) * inverse_normal_cdf(cell_midpoint(u));
}

void require_attempt_budget(const AbcConfig& config, std::size_t t, std::size_t accepted,
                            std::size_t attempts) {
  if (attempts > config.max_attempts_per_particle * config.particles) {
    throw AttemptBudgetExceeded(t, accepted, attempts);
  }
}

}  // namespace

Prior Prior::uniform(double a, double b) {
  if (!(b > a)) throw std::invalid_argument("uniform prior needs lower < upper");
  Prior p;
  p.lower = a;
  p.upper = b;
  const double width = b - a;
  p.density = [a, b, width](double x) { return (x > a && x < b) ? 1.0 / width : 0.0; };
  p.inverse_cdf = [a, width](double u) { return a + width * u; };
  p.variance = width * width / 12.0;
  return p;
}

void HmsModel::validate() const {
  if (!(sigma_obs > 0.0)) throw std::invalid_argument("HMS observation noise must be positive");
  if (length < 2) throw std::invalid_argument("HMS series needs at least two observations");
}

std::vector<double> simulate_hms(double theta, const HmsModel& model, std::mt19937_64& rng) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::domain_error("switching probability outside (0,1)");
  std::vector<double> y(model.length);
  double x = (rng() >> 63) ? model.level : -model.level;
  for (std::size_t k = 0; k < model.length; ++k) {
    if (k > 0 && uniform32(rng) < theta) x = -x;
    y[k] = x + model.sigma_obs * inverse_normal_cdf(cell_midpoint(uniform32(rng)));
  }
  return y;
}

std::vector<double> default_summary(std::span<const double> y) {
  if (y.size() < 2) throw std::invalid_argument("summary needs at least two observations");
  const std::size_t m = y.size() - 1;
  double mean_abs = 0.0;
  for (double v : y) mean_abs += std::fabs(v);
  mean_abs /= static_cast<double>(y.size());
  // Pearson correlation of the pairs (y_k, y_{k+1}).
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    ma += y[k];
    mb += y[k + 1];
  }
  ma /= static_cast<double>(m);
  mb /= static_cast<double>(m);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double a = y[k] - ma, b = y[k + 1] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  const double acf = saa > 0.0 && sbb > 0.0 ? std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0) : 0.0;
  return {acf, mean_abs};
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("summary dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double adaptive_epsilon(std::span<const double> distances, double q) {
  if (distances.empty()) throw std::invalid_argument("adaptive_epsilon: no distances");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("adaptive_epsilon: q outside (0,1)");
  std::vector<double> d(distances.begin(), distances.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(d.size())));
  rank = std::clamp<std::size_t>(rank, 1, d.size());
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(rank - 1), d.end());
  return d[rank - 1];
}

void AbcConfig::validate() const {
  if (particles == 0) throw std::invalid_argument("ABC needs at least one particle");
  if (iterations == 0) throw std::invalid_argument("ABC needs at least one iteration");
  if (!simulator) throw std::invalid_argument("ABC config has no simulator");
  if (!prior.density || !prior.inverse_cdf) throw std::invalid_argument("ABC prior incomplete");
  if (quantile > 0.0) {
    if (!(quantile < 1.0)) throw std::invalid_argument("ABC quantile must lie in (0,1)");
    if (pilot == 0) throw std::invalid_argument("adaptive epsilon needs a pilot size");
    return;
  }
  if (epsilons.size() != iterations) {
    throw std::invalid_argument("epsilon schedule length must equal the number of iterations");
  }
  for (std::size_t t = 0; t < epsilons.size(); ++t) {
    if (!(epsilons[t] > 0.0)) throw std::invalid_argument("epsilons must be positive");
    if (t > 0 && !(epsilons[t] < epsilons[t - 1])) {
      throw std::invalid_argument("epsilon schedule must be strictly decreasing");
    }
  }
}

HmsModel hms_model_from_config(const KeyValueConfig& config) {
  HmsModel m;
  m.sigma_obs = config.get_double("sigma_obs", m.sigma_obs);
  m.length = config.get_uint("length", m.length);
  m.validate();
  return m;
}

std::vector<double> default_hms_epsilons(std::size_t iterations) {
  const std::vector<double> base = {2.0, 1.0, 0.6, 0.5, 0.45};
  if (iterations <= base.size()) return {base.end() - static_cast<std::ptrdiff_t>(iterations), base.end()};
  std::vector<double> eps = base;
  while (eps.size() < iterations) eps.push_back(0.9 * eps.back());
  return eps;
}

AbcConfig hms_abc_config(const KeyValueConfig& config, const HmsModel& model) {
  AbcConfig c;
  c.particles = config.get_uint("N", 256);
  c.iterations = config.get_uint("T", 5);
  c.quantile = config.get_double("quantile", 0.0);
  c.pilot = config.get_uint("pilot", 0);
  c.max_attempts_per_particle = config.get_uint("max_attempts", c.max_attempts_per_particle);
  c.epsilons = config.get_doubles("epsilons");
  if (c.epsilons.empty() && c.quantile == 0.0) c.epsilons = default_hms_epsilons(c.iterations);
  c.simulator = [model](double theta, std::mt19937_64& rng) { return simulate_hms(theta, model, rng); };
  c.validate();
  return c;
}

AttemptBudgetExceeded::AttemptBudgetExceeded(std::size_t t, std::size_t accepted, std::size_t attempts)
    : std::runtime_error("ABC attempt budget exceeded at iteration " + std::to_string(t) + ": " +
                         std::to_string(accepted) + " accepted in " + std::to_string(attempts) +
                         " attempts (acceptance rate " +
                         std::to_string(attempts ? static_cast<double>(accepted) /
                                                       static_cast<double>(attempts)
                                                 : 0.0) +
                         ")"),
      t_(t),
      accepted_(accepted),
      attempts_(attempts) {}

double twice_empirical_variance(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return 2.0 * ss / (n - 1.0);
}

double twice_weighted_variance(std::span<const double> values, std::span<const double> weights) {
  double mean = 0.0, sum_sq_w = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    mean += weights[i] * values[i];
    sum_sq_w += weights[i] * weights[i];
  }
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    var += weights[i] * (values[i] - mean) * (values[i] - mean);
  }
  const double correction = 1.0 - sum_sq_w;
  if (correction > 1e-12) var /= correction;
  return 2.0 * var;
}

namespace {

constexpr std::size_t kDirectSumLimit = 64;
constexpr int kTaylorTerms = 24;
constexpr double kCutoff = 9.25;
// Taylor moments are only trusted for |x - center| <= kTaylorRadius * scale;
// beyond that the cluster is summed directly to avoid cancellation.
constexpr double kTaylorRadius = 6.0;

double direct_kernel_sum(double x, std::span<const double> sources, std::span<const double> weights,
                         double scale) {
  double s = 0.0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    s += weights[j] * std_normal_pdf((x - sources[j]) / scale);
  }
  return s;
}

}  // namespace

std::vector<double> gaussian_kernel_sums(std::span<const double> targets,
                                         std::span<const double> sources,
                                         std::span<const double> weights, double scale) {
  if (sources.size() != weights.size()) throw std::invalid_argument("one weight per source");
  if (!(scale > 0.0)) throw std::invalid_argument("kernel scale must be positive");
  std::vector<double> out(targets.size());
  if (sources.size() <= kDirectSumLimit) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      out[i] = direct_kernel_sum(targets[i], sources, weights, scale);
    }
    return out;
  }

  std::vector<std::size_t> order(sources.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sources[a] < sources[b]; });

  struct Cluster {
    double center;
    std::size_t begin, end;  // range in `order`
    std::array<double, kTaylorTerms> moments;
  };
  std::vector<Cluster> clusters;
  for (std::size_t begin = 0; begin < order.size();) {
    const double lo = sources[order[begin]];
    std::size_t end = begin;
    while (end < order.size() && sources[order[end]] - lo <= 0.5 * scale) ++end;
    Cluster c{};
    c.center = 0.5 * (lo + sources[order[end - 1]]);
    c.begin = begin;
    c.end = end;
    for (std::size_t k = begin; k < end; ++k) {
      const double t = (sources[order[k]] - c.center) / scale;
      double term = weights[order[k]] * std::exp(-0.5 * t * t);
      for (int p = 0; p < kTaylorTerms; ++p) {
        c.moments[p] += term;
        term *= t / static_cast<double>(p + 1);
      }
    }
    clusters.push_back(c);
    begin = end;
  }

  const auto center_below = [](const Cluster& c, double v) { return c.center < v; };
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double x = targets[i];
    // The window is anchored at the nearest cluster, so terms left out are
    // below exp(-kCutoff^2 / 2) relative to the nearest kernel value.
    const auto near = std::lower_bound(clusters.begin(), clusters.end(), x, center_below);
    double nearest = std::numeric_limits<double>::infinity();
    if (near != clusters.end()) nearest = near->center - x;
    if (near != clusters.begin()) nearest = std::min(nearest, x - std::prev(near)->center);
    const double reach = (nearest / scale + 0.5 + kCutoff) * scale;
    const auto first = std::lower_bound(clusters.begin(), clusters.end(), x - reach, center_below);
    double s = 0.0;
    for (auto it = first; it != clusters.end() && it->center <= x + reach; ++it) {
      const double a = (x - it->center) / scale;
      if (std::fabs(a) > kTaylorRadius) {
        for (std::size_t k = it->begin; k < it->end; ++k) {
          const double z = (x - sources[order[k]]) / scale;
          s += weights[order[k]] * std::exp(-0.5 * z * z);
        }
        continue;
      }
      double poly = it->moments[kTaylorTerms - 1];
      for (int p = kTaylorTerms - 2; p >= 0; --p) poly = poly * a + it->moments[p];
      s += std::exp(-0.5 * a * a) * poly;
    }
    out[i] = s > 0.0 ? kInvSqrt2Pi * s : direct_kernel_sum(x, sources, weights, scale);
  }
  return out;
}

double population_weight(double theta, const AbcPopulation& previous, const Prior& prior) {
  const double scale = std::sqrt(previous.sigma);
  double denom = 0.0;
  for (std::size_t j = 0; j < previous.size(); ++j) {
    denom += previous.omegas[j] * std_normal_pdf((theta - previous.thetas[j]) / scale);
  }
  return prior.density(theta) / denom;
}

AbcPopulation init_population(const AbcConfig& config, std::span<const double> observed_summary,
                              double epsilon, UniformSource& stream, std::mt19937_64& sim_rng,
                              AbcTimings* timings) {
  if (stream.dimension() != 1) throw std::invalid_argument("init_population needs a 1-D stream");
  const std::size_t n = config.particles;
  AbcPopulation pop;
  pop.t = 1;
  pop.epsilon = epsilon;
  pop.thetas.reserve(n);
  pop.particle_attempts.reserve(n);
  double u = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t tries = 0;
    while (true) {
      require_attempt_budget(config, 1, i, pop.attempts);
      draw(stream, std::span<double>(&u, 1), timings);
      ++pop.attempts;
      ++tries;
      const double theta = config.prior.inverse_cdf(u);
      if (!config.prior.in_support(theta)) continue;
      ++pop.simulator_calls;
      if (simulated_distance(config, theta, observed_summary, sim_rng, timings) <= epsilon) {
        pop.thetas.push_back(theta);
        break;
      }
    }
    pop.particle_attempts.push_back(tries);
  }
  pop.omegas.assign(n, 1.0 / static_cast<double>(n));
  pop.sigma = twice_empirical_variance(pop.thetas);
  if (!(pop.sigma > 0.0)) pop.sigma = 2.0 * config.prior.variance;
  return pop;
}

AbcPopulation move_population(const AbcPopulation& previous, const AbcConfig& config,
                              std::span<const double> observed_summary, double epsilon,
                              UniformSource& stream, std::mt19937_64& sim_rng,
                              AbcTimings* timings) {
  if (stream.dimension() != 2) throw std::invalid_argument("move_population needs a 2-D stream");
  if (previous.t < 1 || previous.size() == 0) throw std::invalid_argument("empty previous population");
  const std::size_t n = config.particles;
  AbcPopulation pop;
  pop.t = previous.t + 1;
  pop.epsilon = epsilon;
  pop.thetas.reserve(n);
  pop.particle_attempts.reserve(n);

  const SortedAncestors ancestors(previous);
  std::array<double, 2> uv{};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t tries = 0;
    while (true) {
      require_attempt_budget(config, pop.t, i, pop.attempts);
      draw(stream, uv, timings);
      ++pop.attempts;
      ++tries;
      double theta;
      {
        ScopedTimer timer(slot(timings, &AbcTimings::resample_ms));
        theta = propose(previous, ancestors, uv[0], uv[1]);
      }
      if (!config.prior.in_support(theta)) continue;
      ++pop.simulator_calls;
      if (simulated_distance(config, theta, observed_summary, sim_rng, timings) <= epsilon) {
        pop.thetas.push_back(theta);
        break;
      }
    }
    pop.particle_attempts.push_back(tries);
  }

  {
    ScopedTimer timer(slot(timings, &AbcTimings::resample_ms));
    const auto denominators =
        gaussian_kernel_sums(pop.thetas, previous.thetas, previous.omegas, std::sqrt(previous.sigma));
    pop.omegas.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pop.omegas[i] = config.prior.density(pop.thetas[i]) / denominators[i];
      if (!std::isfinite(pop.omegas[i]) || pop.omegas[i] < 0.0) {
        throw std::runtime_error("ABC weight is not finite at iteration " + std::to_string(pop.t));
      }
      total += pop.omegas[i];
    }
    if (!(total > 0.0)) {
      throw std::runtime_error("all ABC weights are zero at iteration " + std::to_string(pop.t));
    }
    for (auto& w : pop.omegas) w /= total;
  }
  pop.sigma = twice_weighted_variance(pop.thetas, pop.omegas);
  if (!(pop.sigma > 0.0)) pop.sigma = previous.sigma;
  return pop;
}

std::string to_string(AbcEngine e) { return e == AbcEngine::PQMC ? "pqmc" : "mc"; }

AbcEngine abc_engine_from_string(const std::string& name) {
  if (name == "pqmc" || name == "qmc") return AbcEngine::PQMC;
  if (name == "mc" || name == "plain-mc") return AbcEngine::PlainMC;
  throw std::invalid_argument("unknown ABC engine '" + name + "'");
}

namespace {

std::unique_ptr<UniformSource> iteration_source(const AbcRunOptions& options, std::size_t t,
                                                std::size_t dim) {
  const std::uint64_t seed = derive_seed(options.seed, 2 * t);
  if (options.engine == AbcEngine::PlainMC || options.pseudorandom_uniforms) {
    return std::make_unique<PseudoUniformStream>(dim, seed);
  }
  StreamConfig sc;
  sc.dim = dim;
  sc.randomization = options.randomization;
  sc.seed = seed;
  sc.mode = options.mode;
  sc.skip_zero_point = true;
  return std::make_unique<RqmcStream>(sc);
}

// Pilot distances for the adaptive threshold, drawn with pseudorandom
// uniforms from the iteration's proposal.
double pilot_epsilon(const AbcConfig& config, const AbcPopulation* previous,
                     std::span<const double> observed_summary, std::uint64_t seed,
                     std::mt19937_64& sim_rng, std::size_t& sim_calls) {
  PseudoUniformStream source(2, seed);
  std::vector<double> distances;
  distances.reserve(config.pilot);
  std::optional<SortedAncestors> ancestors;
  if (previous) ancestors.emplace(*previous);
  std::array<double, 2> uv{};
  std::size_t guard = 0;
  while (distances.size() < config.pilot) {
    if (++guard > config.pilot * config.max_attempts_per_particle) {
      throw AttemptBudgetExceeded(previous ? previous->t + 1 : 1, distances.size(), guard);
    }
    source.next(uv);
    const double theta = previous ? propose(*previous, *ancestors, uv[0], uv[1])
                                  : config.prior.inverse_cdf(uv[0]);
    if (!config.prior.in_support(theta)) continue;
    ++sim_calls;
    distances.push_back(config.distance(config.summary(config.simulator(theta, sim_rng)),
                                        observed_summary));
  }
  return adaptive_epsilon(distances, config.quantile);
}

}  // namespace

AbcResult run_abc(const AbcConfig& config, std::span<const double> observed,
                  const AbcRunOptions& options) {
  config.validate();
  const auto observed_summary = config.summary(observed);
  std::mt19937_64 sim_rng(derive_seed(options.seed, 0x5157));
  AbcResult result;
  const bool adaptive = config.quantile > 0.0;
  double previous_eps = std::numeric_limits<double>::infinity();

  for (std::size_t t = 1; t <= config.iterations; ++t) {
    const AbcPopulation* prev = t == 1 ? nullptr : &result.history.back();
    double eps;
    if (adaptive) {
      std::size_t calls = 0;
      eps = std::min(previous_eps, pilot_epsilon(config, prev, observed_summary,
                                                 derive_seed(options.seed, 2 * t + 1), sim_rng,
                                                 calls));
      result.total_simulator_calls += calls;
    } else {
      eps = config.epsilons[t - 1];
    }
    previous_eps = eps;
    auto source = iteration_source(options, t, t == 1 ? 1 : 2);
    AbcPopulation pop = t == 1 ? init_population(config, observed_summary, eps, *source, sim_rng,
                                                 &result.timings)
                               : move_population(*prev, config, observed_summary, eps, *source,
                                                 sim_rng, &result.timings);
    result.total_simulator_calls += pop.simulator_calls;
    result.acceptance_rates.push_back(pop.acceptance_rate());
    result.epsilons.push_back(eps);
    result.history.push_back(std::move(pop));
  }

  const auto& last = result.final_population();
  double mean = 0.0;
  for (std::size_t i = 0; i < last.size(); ++i) mean += last.omegas[i] * last.thetas[i];
  double var = 0.0;
  for (std::size_t i = 0; i < last.size(); ++i) {
    var += last.omegas[i] * (last.thetas[i] - mean) * (last.thetas[i] - mean);
  }
  result.posterior_mean = mean;
  result.posterior_var = var;
  return result;
}

}  // namespace sqmc
