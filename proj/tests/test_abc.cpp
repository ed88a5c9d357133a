#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "sqmc/abc.hpp"
#include "sqmc/config.hpp"
#include "sqmc/qseq.hpp"
#include "sqmc/stats.hpp"

using namespace sqmc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double gauss(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

HmsModel hms(double sigma, std::size_t length) {
  HmsModel m;
  m.sigma_obs = sigma;
  m.length = length;
  return m;
}

AbcConfig toy_config(std::size_t n, std::vector<double> eps) {
  AbcConfig c;
  c.particles = n;
  c.iterations = eps.size();
  c.epsilons = std::move(eps);
  const auto model = hms(0.5, 100);
  c.simulator = [model](double theta, std::mt19937_64& rng) { return simulate_hms(theta, model, rng); };
  return c;
}

std::vector<double> toy_observed() {
  std::mt19937_64 rng(12345);
  return simulate_hms(0.3, hms(0.5, 100), rng);
}

// Textbook lag-1 correlation from raw sums, independent of default_summary.
double lag1_from_sums(const std::vector<double>& y) {
  const double m = static_cast<double>(y.size() - 1);
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t k = 0; k + 1 < y.size(); ++k) {
    sa += y[k];
    sb += y[k + 1];
    saa += y[k] * y[k];
    sbb += y[k + 1] * y[k + 1];
    sab += y[k] * y[k + 1];
  }
  const double cov = sab - sa * sb / m;
  return cov / std::sqrt((saa - sa * sa / m) * (sbb - sb * sb / m));
}

}  // namespace

TEST_CASE("simulate_hms limits and switch counts") {
  std::mt19937_64 rng(1);
  SUBCASE("no switches as theta -> 0") {
    const auto y = simulate_hms(1e-12, hms(0.5, 400), rng);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 400.0;
    CHECK(std::fabs(std::fabs(mean) - 2.0) < 3.0 * 0.5 / std::sqrt(400.0));
  }
  SUBCASE("certain switches as theta -> 1") {
    const auto y = simulate_hms(1.0 - 1e-12, hms(1e-9, 50), rng);
    for (std::size_t k = 1; k < y.size(); ++k) REQUIRE(y[k] * y[k - 1] < 0.0);
    for (double v : y) REQUIRE(std::fabs(std::fabs(v) - 2.0) < 1e-6);
  }
  SUBCASE("switch count matches Binomial(99, 0.3)") {
    std::vector<double> counts;
    for (int r = 0; r < 10000; ++r) {
      const auto y = simulate_hms(0.3, hms(1e-9, 100), rng);
      int s = 0;
      for (std::size_t k = 1; k < y.size(); ++k) s += (y[k] > 0) != (y[k - 1] > 0);
      counts.push_back(s);
    }
    const double se = std::sqrt(99 * 0.3 * 0.7 / 10000.0);
    CHECK(std::fabs(stats::mean(counts) - 29.7) < 3.0 * se);
  }
  SUBCASE("theta outside (0,1)") {
    CHECK_THROWS_AS(simulate_hms(0.0, hms(0.5, 10), rng), std::domain_error);
    CHECK_THROWS_AS(simulate_hms(1.0, hms(0.5, 10), rng), std::domain_error);
    CHECK_THROWS_AS(simulate_hms(-0.2, hms(0.5, 10), rng), std::domain_error);
  }
  SUBCASE("model validation") {
    CHECK_THROWS(hms(0.0, 10).validate());
    CHECK_THROWS(hms(0.5, 1).validate());
  }
}

TEST_CASE("default_summary") {
  SUBCASE("constant series") {
    const std::vector<double> y(10, -1.5);
    CHECK(default_summary(y) == std::vector<double>{0.0, 1.5});
  }
  SUBCASE("noise-free alternation") {
    std::vector<double> y(100);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = k % 2 ? -2.0 : 2.0;
    const auto s = default_summary(y);
    CHECK(s[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(s[1] == 2.0);
  }
  SUBCASE("agrees with the sum formula on a generic series") {
    std::mt19937_64 rng(4);
    const auto y = simulate_hms(0.2, hms(0.7, 60), rng);
    CHECK(default_summary(y)[0] == doctest::Approx(lag1_from_sums(y)).epsilon(1e-10));
  }
  SUBCASE("theta = 0.1 expectation matches an independent simulation") {
    // Oracle: its own chain and noise generators, 10^5 replicates.
    std::mt19937_64 orng(77);
    std::bernoulli_distribution coin(0.5), flip(0.1);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<double> oracle;
    oracle.reserve(100000);
    std::vector<double> y(200);
    for (int r = 0; r < 100000; ++r) {
      double x = coin(orng) ? 2.0 : -2.0;
      for (std::size_t k = 0; k < y.size(); ++k) {
        if (k > 0 && flip(orng)) x = -x;
        y[k] = x + noise(orng);
      }
      oracle.push_back(lag1_from_sums(y));
    }
    std::mt19937_64 rng(78);
    std::vector<double> lib;
    for (int r = 0; r < 10000; ++r) lib.push_back(default_summary(simulate_hms(0.1, hms(0.5, 200), rng))[0]);
    const double se = std::hypot(stats::standard_error(oracle), stats::standard_error(lib));
    CHECK(std::fabs(stats::mean(oracle) - stats::mean(lib)) < 3.0 * se);
  }
  SUBCASE("needs two observations") {
    CHECK_THROWS(default_summary(std::vector<double>{1.0}));
  }
  CHECK(euclidean_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 5.0);
  CHECK_THROWS(euclidean_distance(std::vector<double>{0}, std::vector<double>{3, 4}));
}

TEST_CASE("adaptive_epsilon") {
  CHECK(adaptive_epsilon(std::vector<double>{4, 1, 3, 2}, 0.5) == 2.0);
  CHECK(adaptive_epsilon(std::vector<double>{4, 1, 3, 2}, 0.999) == 4.0);
  CHECK(adaptive_epsilon(std::vector<double>{4, 1, 3, 2}, 0.01) == 1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> d(10000);
  for (auto& x : d) x = u(rng);
  CHECK(std::fabs(adaptive_epsilon(d, 0.25) - 0.25) < 0.02);
  CHECK_THROWS(adaptive_epsilon(std::vector<double>{}, 0.5));
  CHECK_THROWS(adaptive_epsilon(d, 0.0));
  CHECK_THROWS(adaptive_epsilon(d, 1.0));
}

TEST_CASE("variance conventions") {
  CHECK(twice_empirical_variance(std::vector<double>{0.2, 0.4, 0.6}) == doctest::Approx(0.08).epsilon(1e-14));
  // Uniform weights: the reliability correction turns the weighted variance
  // into the unbiased one.
  const std::vector<double> v{0.1, 0.7, 0.4, 0.9};
  const std::vector<double> w(4, 0.25);
  CHECK(twice_weighted_variance(v, w) == doctest::Approx(twice_empirical_variance(v)).epsilon(1e-13));
  // Hand value: weights (0.75, 0.25) on (0, 1): var 0.1875, correction 1 - 0.625.
  CHECK(twice_weighted_variance(std::vector<double>{0.0, 1.0}, std::vector<double>{0.75, 0.25}) ==
        doctest::Approx(2.0 * 0.1875 / 0.375));
}

TEST_CASE("init_population with an accept-all threshold takes the first N prior draws") {
  const auto observed = default_summary(toy_observed());
  const auto c = toy_config(16, {kInf});
  StreamConfig sc;
  sc.dim = 1;
  sc.randomization = Randomization::DigitalShift;
  sc.seed = 9;
  sc.skip_zero_point = true;
  RqmcStream stream(sc), reference(sc);
  std::mt19937_64 rng(3);
  const auto pop = init_population(c, observed, kInf, stream, rng);
  REQUIRE(pop.size() == 16);
  CHECK(pop.attempts == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(pop.thetas[i] == reference.next()[0]);
    CHECK(pop.omegas[i] == 1.0 / 16.0);
    CHECK(pop.particle_attempts[i] == 1);
  }
  CHECK(pop.sigma == doctest::Approx(twice_empirical_variance(pop.thetas)));

  SUBCASE("non-uniform prior goes through its inverse CDF") {
    auto c2 = c;
    c2.prior = Prior::uniform(0.2, 0.6);
    RqmcStream s2(sc), r2(sc);
    std::mt19937_64 rng2(3);
    const auto p2 = init_population(c2, observed, kInf, s2, rng2);
    for (std::size_t i = 0; i < 16; ++i) CHECK(p2.thetas[i] == doctest::Approx(0.2 + 0.4 * r2.next()[0]));
  }
  CHECK_THROWS(Prior::uniform(1.0, 1.0));
}

TEST_CASE("T = 1 is rejection ABC from the prior") {
  const auto observed = default_summary(toy_observed());
  const auto c = toy_config(32, {0.6});
  PseudoUniformStream s1(1, 21), s2(1, 21);
  std::mt19937_64 r1(8), r2(8);
  const auto pop = init_population(c, observed, 0.6, s1, r1);

  std::vector<double> accepted;
  std::size_t attempts = 0;
  while (accepted.size() < 32) {
    const double theta = s2.next()[0];
    ++attempts;
    if (!(theta > 0.0 && theta < 1.0)) continue;
    const auto z = simulate_hms(theta, hms(0.5, 100), r2);
    if (euclidean_distance(default_summary(z), observed) <= 0.6) accepted.push_back(theta);
  }
  CHECK(pop.thetas == accepted);
  CHECK(pop.attempts == attempts);

  AbcRunOptions o;
  o.seed = 4;
  const auto r = run_abc(c, toy_observed(), o);
  REQUIRE(r.history.size() == 1);
  CHECK(r.posterior_mean == doctest::Approx(stats::mean(r.final_population().thetas)).epsilon(1e-13));
}

TEST_CASE("importance weights") {
  AbcPopulation prev;
  prev.thetas = {0.3, 0.5};
  prev.omegas = {0.5, 0.5};
  prev.sigma = 0.04;
  prev.t = 1;
  const Prior prior = Prior::uniform(0.0, 1.0);
  CHECK(population_weight(0.4, prev, prior) == doctest::Approx(1.0 / (0.5 * gauss(0.5) + 0.5 * gauss(-0.5))).epsilon(1e-14));
  CHECK(population_weight(0.4, prev, prior) == doctest::Approx(2.8403).epsilon(1e-4));
  CHECK(population_weight(1.2, prev, prior) == 0.0);

  SUBCASE("identical ancestors give equal weights to equal-prior proposals") {
    AbcPopulation same = prev;
    same.thetas = {0.4, 0.4};
    CHECK(population_weight(0.35, same, prior) == doctest::Approx(population_weight(0.45, same, prior)));
  }

  SUBCASE("N = 1 move normalizes to one") {
    auto c = toy_config(1, {kInf, 1e9});
    AbcPopulation one;
    one.thetas = {0.5};
    one.omegas = {1.0};
    one.sigma = 0.01;
    one.t = 1;
    PseudoUniformStream s(2, 6);
    std::mt19937_64 rng(6);
    const auto next = move_population(one, c, default_summary(toy_observed()), 1e9, s, rng);
    REQUIRE(next.size() == 1);
    CHECK(next.omegas[0] == 1.0);
    CHECK(population_weight(next.thetas[0], one, prior) ==
          doctest::Approx(1.0 / gauss((next.thetas[0] - 0.5) / 0.1)));
    CHECK(next.t == 2);
  }
}

TEST_CASE("gaussian_kernel_sums matches direct summation") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n : {10u, 300u, 2000u}) {
    std::vector<double> src(n), w(n), tgt(500);
    for (auto& x : src) x = u(rng);
    for (auto& x : w) x = u(rng);
    for (auto& x : tgt) x = 1.4 * u(rng) - 0.2;
    for (double scale : {0.003, 0.05, 0.3, 2.0}) {
      const auto fast = gaussian_kernel_sums(tgt, src, w, scale);
      for (std::size_t i = 0; i < tgt.size(); ++i) {
        long double direct = 0.0L;
        for (std::size_t j = 0; j < n; ++j) {
          const long double z = (tgt[i] - src[j]) / static_cast<long double>(scale);
          direct += w[j] * std::exp(-0.5L * z * z);
        }
        direct /= std::sqrt(2.0L * static_cast<long double>(M_PI));
        CAPTURE(n);
        CAPTURE(scale);
        if (direct > 1e-250L) {
          REQUIRE(std::fabs(static_cast<double>((fast[i] - direct) / direct)) < 1e-12);
        } else {
          REQUIRE(fast[i] >= 0.0);
        }
      }
    }
  }
  CHECK_THROWS(gaussian_kernel_sums(std::vector<double>{0.0}, std::vector<double>{0.0, 1.0},
                                    std::vector<double>{1.0}, 1.0));
  CHECK_THROWS(gaussian_kernel_sums(std::vector<double>{0.0}, std::vector<double>{0.0},
                                    std::vector<double>{1.0}, 0.0));
}

TEST_CASE("run_abc invariants on the toy model") {
  const auto y = toy_observed();
  const auto c = toy_config(64, default_hms_epsilons(5));
  for (auto engine : {AbcEngine::PQMC, AbcEngine::PlainMC}) {
    AbcRunOptions o;
    o.engine = engine;
    o.seed = 31;
    const auto a = run_abc(c, y, o);
    const auto b = run_abc(c, y, o);
    CAPTURE(to_string(engine));
    REQUIRE(a.history.size() == 5);
    CHECK(a.epsilons == default_hms_epsilons(5));
    std::size_t calls = 0;
    for (std::size_t t = 0; t < 5; ++t) {
      const auto& p = a.history[t];
      CHECK(p.t == t + 1);
      CHECK(p.size() == 64);
      CHECK(p.sigma > 0.0);
      CHECK(std::accumulate(p.omegas.begin(), p.omegas.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t i = 0; i < p.size(); ++i) {
        REQUIRE(p.omegas[i] > 0.0);
        REQUIRE(c.prior.in_support(p.thetas[i]));
      }
      CHECK(std::accumulate(p.particle_attempts.begin(), p.particle_attempts.end(), std::size_t{0}) == p.attempts);
      CHECK(p.simulator_calls <= p.attempts);
      calls += p.simulator_calls;
      // Determinism: bit-identical telemetry.
      CHECK(p.thetas == b.history[t].thetas);
      CHECK(p.omegas == b.history[t].omegas);
      CHECK(p.attempts == b.history[t].attempts);
    }
    CHECK(a.total_simulator_calls == calls);
    CHECK(a.posterior_mean > 0.0);
    CHECK(a.posterior_mean < 1.0);
    CHECK(a.posterior_var > 0.0);
  }
}

TEST_CASE("batch regeneration gives the same run as incremental generation") {
  const auto c = toy_config(16, {2.0, 1.0});
  AbcRunOptions inc, batch;
  inc.seed = batch.seed = 2;
  batch.mode = GenerationMode::BatchRegenerate;
  const auto a = run_abc(c, toy_observed(), inc);
  const auto b = run_abc(c, toy_observed(), batch);
  CHECK(a.final_population().thetas == b.final_population().thetas);
}

TEST_CASE("acceptance is monotone in the threshold for paired proposals") {
  const auto observed = default_summary(toy_observed());
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> prior(1e-9, 1.0);
  const std::vector<double> eps{2.0, 1.0, 0.6, 0.5, 0.45};
  std::vector<std::size_t> accepted(eps.size(), 0);
  for (int k = 0; k < 4000; ++k) {
    const double d = euclidean_distance(default_summary(simulate_hms(prior(rng), hms(0.5, 100), rng)), observed);
    for (std::size_t t = 0; t < eps.size(); ++t) accepted[t] += d <= eps[t];
  }
  for (std::size_t t = 1; t < eps.size(); ++t) CHECK(accepted[t] <= accepted[t - 1]);
  CHECK(accepted.back() > 0);
}

TEST_CASE("PQMC path with pseudorandom uniforms matches plain MC") {
  const auto y = toy_observed();
  const auto c = toy_config(64, default_hms_epsilons(5));
  std::vector<double> control, plain;
  for (std::uint64_t r = 0; r < 50; ++r) {
    AbcRunOptions a;
    a.pseudorandom_uniforms = true;
    a.seed = derive_seed(1000, r);
    control.push_back(run_abc(c, y, a).posterior_mean);
    AbcRunOptions b;
    b.engine = AbcEngine::PlainMC;
    b.seed = derive_seed(2000, r);
    plain.push_back(run_abc(c, y, b).posterior_mean);
  }
  CHECK(stats::ks_two_sample_pvalue(control, plain) > 0.001);
}

TEST_CASE("attempt budget") {
  auto c = toy_config(4, {1e-6});
  c.max_attempts_per_particle = 3;
  AbcRunOptions o;
  try {
    run_abc(c, toy_observed(), o);
    FAIL("expected AttemptBudgetExceeded");
  } catch (const AttemptBudgetExceeded& e) {
    CHECK(e.iteration() == 1);
    CHECK(e.accepted() == 0);
    CHECK(e.attempts() > 12);
    CHECK(std::string(e.what()).find("acceptance rate") != std::string::npos);
  }
}

TEST_CASE("adaptive thresholds") {
  auto c = toy_config(32, {});
  c.iterations = 3;
  c.quantile = 0.5;
  c.pilot = 64;
  AbcRunOptions o;
  o.seed = 13;
  const auto r = run_abc(c, toy_observed(), o);
  REQUIRE(r.epsilons.size() == 3);
  for (std::size_t t = 1; t < 3; ++t) CHECK(r.epsilons[t] <= r.epsilons[t - 1]);
  CHECK(r.total_simulator_calls >= 3 * 64);
}

TEST_CASE("configuration") {
  CHECK(default_hms_epsilons(5) == std::vector<double>{2.0, 1.0, 0.6, 0.5, 0.45});
  CHECK(default_hms_epsilons(2) == std::vector<double>{0.5, 0.45});
  const auto seven = default_hms_epsilons(7);
  REQUIRE(seven.size() == 7);
  CHECK(seven[6] == doctest::Approx(0.45 * 0.81));

  const auto kv = KeyValueConfig::parse("N = 50\nT = 3\nepsilons = 1.5, 0.9, 0.7\nsigma_obs = 0.3\nlength = 40\n");
  const auto model = hms_model_from_config(kv);
  CHECK(model.sigma_obs == 0.3);
  CHECK(model.length == 40);
  const auto c = hms_abc_config(kv, model);
  CHECK(c.particles == 50);
  CHECK(c.iterations == 3);
  CHECK(c.epsilons == std::vector<double>{1.5, 0.9, 0.7});
  std::mt19937_64 rng(1);
  CHECK(c.simulator(0.5, rng).size() == 40);

  CHECK(hms_abc_config(KeyValueConfig::parse("T = 2\n"), HmsModel{}).epsilons ==
        std::vector<double>{0.5, 0.45});
  CHECK_THROWS(hms_abc_config(KeyValueConfig::parse("T = 2\nepsilons = 1, 2\n"), HmsModel{}));
  CHECK_THROWS(hms_abc_config(KeyValueConfig::parse("T = 3\nepsilons = 2, 1\n"), HmsModel{}));
  CHECK_THROWS(hms_abc_config(KeyValueConfig::parse("epsilons = 1, -1\nT = 2\n"), HmsModel{}));
  CHECK_THROWS(hms_abc_config(KeyValueConfig::parse("quantile = 1.5\npilot = 10\n"), HmsModel{}));
  CHECK_THROWS(hms_abc_config(KeyValueConfig::parse("quantile = 0.5\n"), HmsModel{}));
  CHECK_THROWS(hms_abc_config(KeyValueConfig::parse("N = 0\n"), HmsModel{}));
  CHECK_THROWS(hms_model_from_config(KeyValueConfig::parse("sigma_obs = 0\n")));

  CHECK(abc_engine_from_string("pqmc") == AbcEngine::PQMC);
  CHECK(abc_engine_from_string("plain-mc") == AbcEngine::PlainMC);
  CHECK(abc_engine_from_string(to_string(AbcEngine::PlainMC)) == AbcEngine::PlainMC);
  CHECK_THROWS(abc_engine_from_string("smc"));

  AbcConfig missing;
  missing.epsilons = {1.0};
  CHECK_THROWS(missing.validate());
}
