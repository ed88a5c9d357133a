#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "sqmc/hilbert.hpp"
#include "sqmc/normal.hpp"
#include "sqmc/qseq.hpp"
#include "sqmc/random.hpp"
#include "sqmc/resample.hpp"
#include "sqmc/smc.hpp"
#include "sqmc/stats.hpp"

using namespace sqmc;

namespace {

std::vector<std::size_t> counts(const AncestorIndices& a, std::size_t n) { return offspring_counts(a, n); }

std::vector<double> random_uniforms(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> u(n);
  for (auto& x : u) x = uniform32(rng);
  return u;
}

// x_t = a x_{t-1} + sx e_t (x_0 = 0), y_t = x_t + sy f_t.
struct LinearGaussian {
  using State = double;
  using Observation = double;
  double a = 0.9;
  double sx = 1.0;
  double sy = 0.5;
  std::size_t u_dim() const { return 1; }
  double gamma(double x, std::span<const double> u, double) const {
    return a * x + sx * inverse_normal_cdf(cell_midpoint(u[0]));
  }
  double weight(double, double next, double y) const { return normal_pdf(y, next, sy * sy); }
};

struct FixedScaleProjection {
  double scale;
  void operator()(double x, double, std::span<double> out) const { out[0] = logistic_unit(x, 0.0, scale); }
};

std::vector<double> lg_data(const LinearGaussian& m, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> y;
  double x = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    x = m.a * x + m.sx * z(rng);
    y.push_back(x + m.sy * z(rng));
  }
  return y;
}

double kalman_log_likelihood(const LinearGaussian& m, const std::vector<double>& y) {
  double mean = 0.0, var = 0.0, ll = 0.0;
  for (double obs : y) {
    mean = m.a * mean;
    var = m.a * m.a * var + m.sx * m.sx;
    const double s = var + m.sy * m.sy;
    ll += -0.5 * std::log(2.0 * M_PI * s) - 0.5 * (obs - mean) * (obs - mean) / s;
    const double gain = var / s;
    mean += gain * (obs - mean);
    var *= 1.0 - gain;
  }
  return ll;
}

double run_sqmc(const LinearGaussian& m, const std::vector<double>& y, std::size_t n, std::uint64_t seed) {
  auto sys = ParticleSystem<double>::uniform(std::vector<double>(n, 0.0));
  const HilbertMap h(1, 62);
  const FixedScaleProjection proj{2.0};
  for (std::size_t t = 0; t < y.size(); ++t) {
    StreamConfig c;
    c.dim = 2;
    c.randomization = Randomization::DigitalShift;
    c.seed = derive_seed(seed, t);
    RqmcStream stream(c);
    sqmc_step(sys, m, y[t], stream, h, proj);
  }
  return sys.log_norm_const;
}

double run_smc(const LinearGaussian& m, const std::vector<double>& y, std::size_t n, std::uint64_t seed,
               Resampler scheme = Resampler::Multinomial) {
  auto sys = ParticleSystem<double>::uniform(std::vector<double>(n, 0.0));
  std::mt19937_64 rng(seed);
  for (double obs : y) smc_step(sys, m, obs, rng, scheme);
  return sys.log_norm_const;
}

struct UnitWeight {
  using State = double;
  using Observation = int;
  std::size_t u_dim() const { return 1; }
  double gamma(double x, std::span<const double> u, int) const { return x + u[0]; }
  double weight(double, double, int) const { return 1.0; }
};

struct ZeroWeight {
  using State = double;
  using Observation = int;
  std::size_t u_dim() const { return 1; }
  double gamma(double x, std::span<const double>, int) const { return x; }
  double weight(double, double, int) const { return 0.0; }
};

}  // namespace

TEST_CASE("multinomial resampling") {
  SUBCASE("degenerate weights") {
    const std::vector<double> w{1.0, 0.0, 0.0};
    const std::vector<double> u{0.0, 0.5, 0.999};
    CHECK(multinomial_resample(w, u) == AncestorIndices{0, 0, 0});
  }
  SUBCASE("uniform weights at stratified uniforms") {
    const std::size_t n = 8;
    const std::vector<double> w(n, 1.0 / n);
    std::vector<double> u;
    for (std::size_t i = 0; i < n; ++i) u.push_back(static_cast<double>(i) / n + 1e-6);
    AncestorIndices expected(n);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    CHECK(multinomial_resample(w, u) == expected);
  }
  SUBCASE("law of large numbers for (0.75, 0.25)") {
    std::mt19937_64 rng(1);
    const std::vector<double> w{0.75, 0.25};
    const auto a = multinomial_resample(w, random_uniforms(100000, rng));
    const double freq = static_cast<double>(std::count(a.begin(), a.end(), 0u)) / 1e5;
    CHECK(std::fabs(freq - 0.75) < 0.005);
  }
  SUBCASE("strict inequality at the boundary") {
    const std::vector<double> w{0.5, 0.5};
    CHECK(multinomial_resample(w, std::vector<double>{0.5}) == AncestorIndices{1});
  }
  SUBCASE("unnormalized weights are rejected") {
    const std::vector<double> w{0.5, 0.6};
    CHECK_THROWS_AS(multinomial_resample(w, std::vector<double>{0.1, 0.2}), std::invalid_argument);
    const std::vector<double> neg{1.5, -0.5};
    CHECK_THROWS_AS(multinomial_resample(neg, std::vector<double>{0.1, 0.2}), std::invalid_argument);
  }
}

TEST_CASE("systematic resampling") {
  SUBCASE("uniform weights give each index once") {
    const std::vector<double> w(5, 0.2);
    CHECK(counts(systematic_resample(w, 0.37), 5) == std::vector<std::size_t>(5, 1));
  }
  SUBCASE("worked example") {
    const std::vector<double> w{0.5, 0.5, 0.0, 0.0};
    CHECK(counts(systematic_resample(w, 0.1), 4) == std::vector<std::size_t>{2, 2, 0, 0});
  }
  SUBCASE("counts bracket N w and sum to N") {
    std::mt19937_64 rng(2);
    std::gamma_distribution<double> g(0.5);
    for (int rep = 0; rep < 2000; ++rep) {
      const std::size_t n = 1 + rng() % 40;
      std::vector<double> w(n);
      for (auto& x : w) x = g(rng);
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      for (auto& x : w) x /= total;
      const auto c = counts(systematic_resample(w, uniform32(rng)), n);
      REQUIRE(std::accumulate(c.begin(), c.end(), std::size_t{0}) == n);
      for (std::size_t i = 0; i < n; ++i) {
        const double target = static_cast<double>(n) * w[i];
        REQUIRE(static_cast<double>(c[i]) >= std::floor(target - 1e-9));
        REQUIRE(static_cast<double>(c[i]) <= std::ceil(target + 1e-9));
      }
    }
  }
}

TEST_CASE("residual resampling") {
  SUBCASE("multiples of 1/N are deterministic") {
    const std::vector<double> w{0.5, 0.25, 0.25, 0.0};
    CHECK(counts(residual_resample(w, std::vector<double>{}), 4) == std::vector<std::size_t>{2, 1, 1, 0});
  }
  SUBCASE("degenerate weights") {
    const std::vector<double> w{1.0, 0.0, 0.0};
    CHECK(residual_resample(w, std::vector<double>{0.3, 0.9, 0.1}) == AncestorIndices{0, 0, 0});
  }
  SUBCASE("expected counts for (0.5, 0.3, 0.2)") {
    // Deterministic part (1, 0, 0); two residual slots over (0.5, 0.9, 0.6) / 2,
    // so E[counts] = (1 + 2 * 0.25, 2 * 0.45, 2 * 0.3) = N w.
    const std::vector<double> w{0.5, 0.3, 0.2};
    std::mt19937_64 rng(3);
    std::vector<double> mean(3, 0.0);
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
      const auto c = counts(residual_resample(w, random_uniforms(3, rng)), 3);
      for (int i = 0; i < 3; ++i) mean[i] += static_cast<double>(c[i]) / reps;
    }
    CHECK(std::fabs(mean[0] - 1.5) < 0.02);
    CHECK(std::fabs(mean[1] - 0.9) < 0.02);
    CHECK(std::fabs(mean[2] - 0.6) < 0.02);
  }
}

TEST_CASE("resampling means are N w within 3 standard errors") {
  const std::vector<double> w{0.05, 0.3, 0.15, 0.4, 0.1};
  const std::size_t n = w.size();
  for (auto scheme : {Resampler::Multinomial, Resampler::Residual, Resampler::Systematic}) {
    std::mt19937_64 rng(4);
    std::vector<std::vector<double>> c(n);
    for (int r = 0; r < 10000; ++r) {
      const auto k = counts(resample(scheme, w, random_uniforms(n, rng)), n);
      for (std::size_t i = 0; i < n; ++i) c[i].push_back(static_cast<double>(k[i]));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double target = static_cast<double>(n) * w[i];
      const double se = std::max(stats::standard_error(c[i]), 1e-12);
      CAPTURE(to_string(scheme));
      CAPTURE(i);
      CHECK(std::fabs(stats::mean(c[i]) - target) <= 3.0 * se + 1e-12);
    }
  }
}

TEST_CASE("resampler names") {
  for (auto r : {Resampler::Multinomial, Resampler::Systematic, Resampler::Residual})
    CHECK(resampler_from_string(to_string(r)) == r);
  CHECK_THROWS(resampler_from_string("stratified-ish"));
}

TEST_CASE("effective sample size") {
  CHECK(effective_sample_size(std::vector<double>(10, 0.1)) == doctest::Approx(10.0));
  CHECK(effective_sample_size(std::vector<double>{1.0, 0.0, 0.0}) == doctest::Approx(1.0));
}

TEST_CASE("sqmc_resample") {
  const HilbertMap h1(1, 16);
  SUBCASE("single particle") {
    CHECK(sqmc_resample(std::vector<double>{1.0}, std::vector<double>{0.7}, h1,
                        std::vector<double>{0.99}) == AncestorIndices{0});
  }
  SUBCASE("worked example") {
    const std::vector<double> w{0.2, 0.5, 0.3};
    const std::vector<double> states{0.9, 0.1, 0.5};
    const std::vector<double> u{0.1, 0.6, 0.9};
    CHECK(sqmc_resample(w, states, h1, u) == AncestorIndices{1, 2, 0});
  }
  SUBCASE("uniform weights at midpoints follow the curve order") {
    const HilbertMap h2(2, 10);
    std::mt19937_64 rng(5);
    const std::size_t n = 32;
    std::vector<double> pts(2 * n);
    for (auto& x : pts) x = uniform32(rng);
    std::vector<double> u;
    for (std::size_t k = 0; k < n; ++k) u.push_back((k + 0.5) / n);
    const auto a = sqmc_resample(std::vector<double>(n, 1.0 / n), pts, h2, u);
    CHECK(a == h2.sort_by_curve(pts));
  }
  SUBCASE("permutation equivariance") {
    const HilbertMap h2(2, 12);
    std::mt19937_64 rng(6);
    const std::size_t n = 50;
    std::vector<double> pts(2 * n), w(n);
    for (auto& x : pts) x = uniform32(rng);
    for (auto& x : w) x = uniform32(rng) + 0.01;
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;
    auto u = random_uniforms(n, rng);
    std::sort(u.begin(), u.end());
    const auto a = sqmc_resample(w, pts, h2, u);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ppts(2 * n), pw(n);
    for (std::size_t i = 0; i < n; ++i) {
      pw[i] = w[perm[i]];
      ppts[2 * i] = pts[2 * perm[i]];
      ppts[2 * i + 1] = pts[2 * perm[i] + 1];
    }
    const auto b = sqmc_resample(pw, ppts, h2, u);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(perm[b[i]] == a[i]);
  }
  SUBCASE("errors") {
    const std::vector<double> w{0.5, 0.5};
    CHECK_THROWS(sqmc_resample(w, std::vector<double>{0.1, 1.2}, h1, std::vector<double>{0.1, 0.2}));
    CHECK_THROWS(sqmc_resample(w, std::vector<double>{0.1, 0.2}, h1, std::vector<double>{0.6, 0.2}));
    CHECK_THROWS(sqmc_resample(std::vector<double>{0.5, 0.6}, std::vector<double>{0.1, 0.2}, h1,
                               std::vector<double>{0.1, 0.2}));
  }
}

TEST_CASE("unit weights leave the system uniform and the evidence unchanged") {
  const HilbertMap h(1, 20);
  const auto proj = [](double x, int, std::span<double> out) { out[0] = logistic_unit(x); };
  auto sys = ParticleSystem<double>::uniform(std::vector<double>(16, 0.0));
  StreamConfig c;
  c.dim = 2;
  c.randomization = Randomization::DigitalShift;
  RqmcStream stream(c);
  for (int t = 0; t < 3; ++t) sqmc_step(sys, UnitWeight{}, 0, stream, h, proj);
  CHECK(sys.log_norm_const == doctest::Approx(0.0).epsilon(1e-15));
  for (double w : sys.weights) CHECK(w == doctest::Approx(1.0 / 16));
  CHECK(sys.step == 3);

  auto smc = ParticleSystem<double>::uniform(std::vector<double>(16, 0.0));
  std::mt19937_64 rng(1);
  CHECK_FALSE(smc_step(smc, UnitWeight{}, 0, rng, Resampler::Systematic));
  CHECK(smc.log_norm_const == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("a single particle follows x_t = gamma(x_{t-1}, u_t)") {
  const HilbertMap h(1, 20);
  const auto proj = [](double x, int, std::span<double> out) { out[0] = logistic_unit(x); };
  auto sys = ParticleSystem<double>::uniform({0.0});
  StreamConfig c;
  c.dim = 2;
  c.randomization = Randomization::DigitalShift;
  c.seed = 4;
  RqmcStream stream(c);
  RqmcStream copy = stream;
  double x = 0.0;
  for (int t = 0; t < 5; ++t) {
    sqmc_step(sys, UnitWeight{}, 0, stream, h, proj);
    x += copy.next()[1];
    REQUIRE(sys.states[0] == x);
  }
}

TEST_CASE("zero weights abort with the step index") {
  const HilbertMap h(1, 20);
  const auto proj = [](double x, int, std::span<double> out) { out[0] = logistic_unit(x); };
  auto sys = ParticleSystem<double>::uniform(std::vector<double>(4, 0.0));
  PseudoUniformStream stream(2, 1);
  try {
    sqmc_step(sys, ZeroWeight{}, 0, stream, h, proj);
    FAIL("expected degeneracy");
  } catch (const ParticleDegeneracy& e) {
    CHECK(e.step_index() == 1);
  }
  std::mt19937_64 rng(2);
  auto smc = ParticleSystem<double>::uniform(std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(smc_step(smc, ZeroWeight{}, 0, rng, Resampler::Multinomial), ParticleDegeneracy);
}

TEST_CASE("sqmc_step checks the stream dimension") {
  const HilbertMap h(1, 20);
  const auto proj = [](double x, int, std::span<double> out) { out[0] = logistic_unit(x); };
  auto sys = ParticleSystem<double>::uniform(std::vector<double>(4, 0.0));
  PseudoUniformStream stream(3, 1);
  CHECK_THROWS_AS(sqmc_step(sys, UnitWeight{}, 0, stream, h, proj), std::invalid_argument);
}

TEST_CASE("ESS triggers adaptive resampling") {
  std::mt19937_64 rng(3);
  auto sys = ParticleSystem<double>::uniform(std::vector<double>(4, 0.0));
  sys.weights = {1.0, 0.0, 0.0, 0.0};
  CHECK(smc_step(sys, UnitWeight{}, 0, rng, Resampler::Multinomial));
  CHECK_FALSE(smc_step(sys, UnitWeight{}, 0, rng, Resampler::Multinomial));
}

TEST_CASE("evidence matches the Kalman log-likelihood, N = 2^10, T = 10") {
  const LinearGaussian m;
  const auto y = lg_data(m, 10, 99);
  const double exact = kalman_log_likelihood(m, y);
  std::vector<double> sq, mc, sys;
  for (std::uint64_t r = 0; r < 30; ++r) {
    sq.push_back(run_sqmc(m, y, 1024, r));
    mc.push_back(run_smc(m, y, 1024, r));
    sys.push_back(run_smc(m, y, 1024, r, Resampler::Systematic));
  }
  CHECK(std::fabs(stats::mean(sq) - exact) < 3.0 * stats::standard_error(sq));
  CHECK(std::fabs(stats::mean(mc) - exact) < 3.0 * stats::standard_error(mc));
  CHECK(std::fabs(stats::mean(sys) - exact) < 3.0 * stats::standard_error(sys));
}

TEST_CASE("evidence estimates are unbiased over 200 seeds") {
  const LinearGaussian m;
  const auto y = lg_data(m, 10, 7);
  const double exact = kalman_log_likelihood(m, y);
  std::vector<double> sq, mc;
  for (std::uint64_t r = 0; r < 200; ++r) {
    sq.push_back(std::exp(run_sqmc(m, y, 64, 1000 + r) - exact));
    mc.push_back(std::exp(run_smc(m, y, 64, 1000 + r) - exact));
  }
  CHECK(std::fabs(stats::mean(sq) - 1.0) < 3.0 * stats::standard_error(sq));
  CHECK(std::fabs(stats::mean(mc) - 1.0) < 3.0 * stats::standard_error(mc));
}

TEST_CASE("SQMC evidence variance is below multinomial SMC at N = 2^10") {
  const LinearGaussian m;
  const auto y = lg_data(m, 10, 5);
  std::vector<double> sq, mc;
  for (std::uint64_t r = 0; r < 100; ++r) {
    sq.push_back(std::exp(run_sqmc(m, y, 1024, 500 + r)));
    mc.push_back(std::exp(run_smc(m, y, 1024, 500 + r)));
  }
  const auto ratio = stats::bootstrap_variance_ratio(mc, sq, 10000, 1);
  CAPTURE(ratio.ratio);
  CHECK(ratio.ci.lower >= 1.0);
}

TEST_CASE("CSV dumps") {
  auto sys = ParticleSystem<double>::uniform({1.5, 2.5});
  std::ostringstream out;
  const std::vector<std::string> cols{"x"};
  write_particle_header(out, cols);
  write_particles(out, 3, sys, [](std::ostream& o, double x) { o << x; });
  write_evidence_header(out);
  write_evidence(out, 3, sys);
  CHECK(out.str() ==
        "replicate,t,particle,weight,x\n3,0,0,0.5,1.5\n3,0,1,0.5,2.5\nreplicate,t,log_norm_const\n3,0,0\n");
}

TEST_CASE("weighted location and scale") {
  const std::vector<double> v{1.0, 3.0};
  const std::vector<double> w{0.5, 0.5};
  const auto [loc, scale] = weighted_location_scale(v, w);
  CHECK(loc == doctest::Approx(2.0));
  CHECK(scale == doctest::Approx(1.0));
  CHECK(logistic_unit(1e6) < 1.0);
  CHECK(logistic_unit(0.0) == doctest::Approx(0.5));
}

TEST_CASE("empty particle systems are rejected") {
  CHECK_THROWS(ParticleSystem<double>::uniform({}));
}
