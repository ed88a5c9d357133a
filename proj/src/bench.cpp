#include "sqmc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "sqmc/abc.hpp"
#include "sqmc/csv.hpp"
#include "sqmc/dpm.hpp"
#include "sqmc/random.hpp"

namespace sqmc::bench {

namespace {

constexpr double kMinTimedMs = 50.0;
constexpr std::size_t kMaxRepetitions = 1000;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string join(const std::vector<std::string>& items, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& items) {
  std::vector<std::string> s;
  for (auto v : items) s.push_back(std::to_string(v));
  return join(s);
}

// CSV fields never contain separators or line breaks.
std::string sanitize(std::string text) {
  for (char& c : text)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  return text;
}

std::ofstream open_csv(const ExperimentSpec& spec, const std::string& name) {
  std::ofstream out(spec.output_dir / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (spec.output_dir / name).string());
  out << "# spec: " << spec.describe() << " version: " << kVersion << '\n';
  return out;
}

std::string real_or_na(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

KeyValueConfig with_defaults(const KeyValueConfig& user, const KeyValueConfig& defaults) {
  KeyValueConfig merged = defaults;
  for (const auto& [k, v] : user.entries()) merged.set(k, v);
  return merged;
}

KeyValueConfig dpm_defaults() {
  return KeyValueConfig::parse("alpha = 1\nm0 = 0\nv0 = 2\nkernel_var = 0.25\n");
}

std::vector<double> dpm_data(const KeyValueConfig& config) {
  if (const auto path = config.get("data")) return read_observations(*path);
  return default_dpm_data();
}

DpmFilterOptions dpm_options(const KeyValueConfig& config, FilterEngine engine, std::size_t n,
                             std::uint64_t seed) {
  DpmFilterOptions o;
  o.particles = n;
  o.engine = engine;
  o.seed = seed;
  o.resampler = resampler_from_string(config.get_string("resampler", "multinomial"));
  o.randomization = randomization_from_string(config.get_string("randomization", "digital_shift"));
  return o;
}

AbcRunOptions abc_options(const KeyValueConfig& config, AbcEngine engine, std::uint64_t seed) {
  AbcRunOptions o;
  o.engine = engine;
  o.seed = seed;
  o.randomization = randomization_from_string(config.get_string("randomization", "digital_shift"));
  return o;
}

AbcConfig abc_config_for(const KeyValueConfig& config, std::size_t n) {
  KeyValueConfig c = config;
  c.set("N", std::to_string(n));
  return hms_abc_config(c, hms_model_from_config(c));
}

bool is_variance(Experiment e) { return e == Experiment::AbcVariance || e == Experiment::DpmVariance; }

const std::vector<std::string>& allowed_engines(Experiment e) {
  static const std::vector<std::string> abc{"mc", "plain-mc", "pqmc", "qmc"};
  static const std::vector<std::string> dpm{"smc", "sqmc"};
  static const std::vector<std::string> timing{"mc", "qmc-incremental", "qmc-batch"};
  switch (e) {
    case Experiment::AbcVariance:
    case Experiment::AbcRun: return abc;
    case Experiment::DpmVariance:
    case Experiment::DpmRun: return dpm;
    case Experiment::TimingScale: return timing;
  }
  return abc;
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::AbcVariance: return "abc-variance";
    case Experiment::DpmVariance: return "dpm-variance";
    case Experiment::TimingScale: return "timing-scale";
    case Experiment::DpmRun: return "dpm-run";
    case Experiment::AbcRun: return "abc-run";
  }
  return "abc-variance";
}

Experiment experiment_from_string(const std::string& name) {
  for (auto e : {Experiment::AbcVariance, Experiment::DpmVariance, Experiment::TimingScale,
                 Experiment::DpmRun, Experiment::AbcRun})
    if (to_string(e) == name) return e;
  throw UsageError("unknown experiment '" + name + "'");
}

void ExperimentSpec::apply_defaults() {
  if (engines.empty()) {
    switch (experiment) {
      case Experiment::AbcVariance: engines = {"mc", "pqmc"}; break;
      case Experiment::DpmVariance: engines = {"smc", "sqmc"}; break;
      case Experiment::TimingScale: engines = {"mc", "qmc-incremental", "qmc-batch"}; break;
      case Experiment::DpmRun: engines = {"sqmc"}; break;
      case Experiment::AbcRun: engines = {"pqmc"}; break;
    }
  }
  if (n_values.empty()) {
    switch (experiment) {
      case Experiment::AbcVariance:
      case Experiment::AbcRun: n_values = {static_cast<std::size_t>(model.get_uint("N", 256))}; break;
      case Experiment::DpmVariance:
      case Experiment::DpmRun: n_values = {static_cast<std::size_t>(model.get_uint("N", 1024))}; break;
      case Experiment::TimingScale: n_values = {256, 512, 1024, 2048, 4096, 8192}; break;
    }
  }
}

void ExperimentSpec::validate() const {
  if (replicates < 1) throw UsageError("replicates must be >= 1");
  if (engines.empty()) throw UsageError("no engines given");
  if (n_values.empty()) throw UsageError("no N values given");
  for (auto n : n_values)
    if (n == 0) throw UsageError("N values must be positive");
  const auto& allowed = allowed_engines(experiment);
  for (const auto& e : engines)
    if (std::find(allowed.begin(), allowed.end(), e) == allowed.end())
      throw UsageError("engine '" + e + "' is not valid for " + to_string(experiment) +
                       " (expected one of " + join(allowed) + ")");
  if (output_dir.empty()) throw UsageError("output directory required");
  if (threads < 1) throw UsageError("thread count must be >= 1");
  if (bootstrap_resamples < 1) throw UsageError("bootstrap resamples must be >= 1");
}

std::string ExperimentSpec::describe() const {
  std::ostringstream s;
  s << "experiment=" << to_string(experiment) << " engines=" << join(engines)
    << " n=" << join_sizes(n_values) << " replicates=" << replicates << " seed=" << seed_base
    << " bootstrap=" << bootstrap_resamples << " config={" << model.to_string() << "}";
  return s.str();
}

std::size_t default_thread_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BENCH_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<std::size_t>(n, cap);
  }
  return n;
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<double> read_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read data file " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(line.substr(first), &used);
      if (line.find_first_not_of(" \t\r", first + used) != std::string::npos)
        throw std::invalid_argument("trailing text");
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected one real number per line");
    }
  }
  if (out.empty()) throw std::runtime_error(path.string() + ": no observations");
  return out;
}

std::vector<double> default_dpm_data() { return {-1.0, -0.8, 0.0, 0.9, 1.1}; }

std::vector<double> abc_observed_data(const KeyValueConfig& config) {
  if (const auto path = config.get("data")) return read_observations(*path);
  const HmsModel model = hms_model_from_config(config);
  std::mt19937_64 rng(config.get_uint("data_seed", 12345));
  return simulate_hms(config.get_double("theta_true", 0.3), model, rng);
}

// ---------------------------------------------------------------------------

VarianceReport cmd_variance(const ExperimentSpec& spec, std::ostream& log) {
  if (!is_variance(spec.experiment))
    throw UsageError("cmd_variance needs abc-variance or dpm-variance");
  const bool abc = spec.experiment == Experiment::AbcVariance;
  const KeyValueConfig config = abc ? spec.model : with_defaults(spec.model, dpm_defaults());
  const std::vector<double> observed = abc ? abc_observed_data(config) : dpm_data(config);
  const DpmModel dpm_model = abc ? DpmModel{} : DpmModel::from_config(config);

  VarianceReport report;
  for (const auto& engine : spec.engines)
    for (auto n : spec.n_values)
      for (std::size_t r = 0; r < spec.replicates; ++r) {
        ReplicateEstimate e;
        e.engine = engine;
        e.n = n;
        e.replicate = r;
        report.replicates.push_back(e);
      }

  parallel_for(report.replicates.size(), spec.threads, [&](std::size_t i) {
    ReplicateEstimate& e = report.replicates[i];
    const std::uint64_t seed = derive_seed(spec.seed_base, e.replicate);
    const auto start = Clock::now();
    try {
      if (abc) {
        const auto result = run_abc(abc_config_for(config, e.n), observed,
                                    abc_options(config, abc_engine_from_string(e.engine), seed));
        e.estimate = result.posterior_mean;
        e.secondary = result.posterior_var;
        e.simulator_calls = result.total_simulator_calls;
      } else {
        const auto result = run_dpm_filter(
            observed, dpm_model, dpm_options(config, filter_engine_from_string(e.engine), e.n, seed));
        e.estimate = std::exp(result.log_evidence);
        e.secondary = result.log_evidence;
      }
      e.ok = std::isfinite(e.estimate);
      if (!e.ok) e.error = "non-finite estimate";
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
    e.wall_ms = elapsed_ms(start);
  });

  // Wall times are kept in memory only, so that reruns are byte-identical.
  {
    auto out = open_csv(spec, "variance_replicates.csv");
    if (abc)
      out << "replicate,engine,N,posterior_mean,posterior_var,total_sim_calls,status\n";
    else
      out << "replicate,engine,N,evidence,log_evidence,status\n";
    for (const auto& e : report.replicates) {
      out << e.replicate << ',' << e.engine << ',' << e.n << ',';
      if (e.ok) {
        out << format_real(e.estimate) << ',' << format_real(e.secondary) << ',';
        if (abc) out << e.simulator_calls << ',';
        out << "ok\n";
      } else {
        out << "NA,NA," << (abc ? "NA," : "") << "abort: " << sanitize(e.error) << '\n';
      }
    }
  }

  // Replicates are laid out engine-major, then N, then replicate.
  auto values_of = [&](std::size_t engine_index, std::size_t n_index) {
    std::vector<double> v;
    const std::size_t base = (engine_index * spec.n_values.size() + n_index) * spec.replicates;
    for (std::size_t r = 0; r < spec.replicates; ++r)
      if (report.replicates[base + r].ok) v.push_back(report.replicates[base + r].estimate);
    return v;
  };

  std::size_t summary_index = 0;
  for (std::size_t ei = 0; ei < spec.engines.size(); ++ei) {
    for (std::size_t ni = 0; ni < spec.n_values.size(); ++ni) {
      const std::size_t n = spec.n_values[ni];
      VarianceSummary s;
      s.engine = spec.engines[ei];
      s.n = n;
      s.baseline = spec.engines.front();
      const auto values = values_of(ei, ni);
      s.ok = values.size();
      s.failures = spec.replicates - s.ok;
      if (s.failures > 0) {
        ++report.warnings;
        log << "warning: " << s.failures << " of " << spec.replicates << " replicates of " << s.engine
            << " at N=" << n << " aborted and were excluded\n";
      }
      s.mean = values.empty() ? 0.0 : stats::mean(values);
      s.variance = stats::variance(values);
      if (ei > 0) {
        const auto baseline = values_of(0, ni);
        if (values.size() < 2 || baseline.size() < 2) {
          ++report.warnings;
          log << "warning: fewer than two successful replicates for " << s.engine << " at N=" << n
              << "; variance ratio is undefined\n";
        } else if (s.variance <= 0.0) {
          ++report.warnings;
          log << "warning: zero variance for " << s.engine << " at N=" << n
              << "; variance ratio is undefined\n";
        } else {
          s.ratio = stats::bootstrap_variance_ratio(baseline, values, spec.bootstrap_resamples,
                                                    derive_seed(spec.seed_base ^ 0xb007u, summary_index));
        }
      }
      report.summary.push_back(s);
      ++summary_index;
    }
  }

  {
    auto out = open_csv(spec, "variance_summary.csv");
    out << "engine,N,replicates,failures,mean,variance,baseline,ratio,ci_lower,ci_upper\n";
    for (const auto& s : report.summary) {
      const bool have = s.ok > 0;
      out << s.engine << ',' << s.n << ',' << s.ok << ',' << s.failures << ','
          << (have ? format_real(s.mean) : "NA") << ','
          << (s.ok >= 2 ? format_real(s.variance) : "NA") << ',' << s.baseline << ',';
      if (s.ratio)
        out << format_real(s.ratio->ratio) << ',' << format_real(s.ratio->ci.lower) << ','
            << format_real(s.ratio->ci.upper) << '\n';
      else
        out << "NA,NA,NA\n";
    }
  }

  for (const auto& s : report.summary) {
    log << s.engine << " N=" << s.n << " variance=" << (s.ok >= 2 ? format_real(s.variance) : "NA");
    if (s.ratio)
      log << " ratio " << s.baseline << "/" << s.engine << "=" << format_real(s.ratio->ratio) << " ["
          << format_real(s.ratio->ci.lower) << ", " << format_real(s.ratio->ci.upper) << "]";
    log << '\n';
  }
  return report;
}

// ---------------------------------------------------------------------------

TimingReport cmd_timing(const ExperimentSpec& spec, std::ostream& log) {
  if (spec.experiment != Experiment::TimingScale) throw UsageError("cmd_timing needs timing-scale");
  const std::vector<double> observed = abc_observed_data(spec.model);

  auto options_for = [&](const std::string& mode, std::uint64_t seed) {
    AbcRunOptions o = abc_options(spec.model, AbcEngine::PQMC, seed);
    if (mode == "mc") o.engine = AbcEngine::PlainMC;
    else if (mode == "qmc-batch") o.mode = GenerationMode::BatchRegenerate;
    return o;
  };

  auto timed = [&](const AbcConfig& config, const AbcRunOptions& options, std::size_t reps,
                   TimingRecord& rec) {
    AbcTimings sum;
    const auto start = Clock::now();
    for (std::size_t k = 0; k < reps; ++k) {
      const auto result = run_abc(config, observed, options);
      sum.sequence_ms += result.timings.sequence_ms;
      sum.resample_ms += result.timings.resample_ms;
      sum.simulate_ms += result.timings.simulate_ms;
    }
    const double wall = elapsed_ms(start);
    const double r = static_cast<double>(reps);
    rec.repetitions = reps;
    rec.wall_ms = wall / r;
    rec.sequence_ms = std::min(sum.sequence_ms / r, rec.wall_ms);
    rec.resample_ms = std::min(sum.resample_ms / r, rec.wall_ms);
    rec.simulate_ms = std::min(sum.simulate_ms / r, rec.wall_ms);
  };

  TimingReport report;
  std::vector<std::size_t> grid = spec.n_values;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  for (const auto& mode : spec.engines) {
    {
      TimingRecord warmup;
      timed(abc_config_for(spec.model, grid.front()), options_for(mode, spec.seed_base), 1, warmup);
    }
    for (auto n : spec.n_values) {
      const AbcConfig config = abc_config_for(spec.model, n);
      for (std::size_t r = 0; r < spec.replicates; ++r) {
        TimingRecord rec;
        rec.mode = mode;
        rec.n = n;
        rec.replicate = r;
        const auto options = options_for(mode, derive_seed(spec.seed_base, r));
        timed(config, options, 1, rec);
        if (rec.wall_ms < kMinTimedMs) {
          const auto reps = std::min<std::size_t>(
              kMaxRepetitions,
              static_cast<std::size_t>(std::ceil(kMinTimedMs / std::max(rec.wall_ms, 1e-3))));
          timed(config, options, std::max<std::size_t>(reps, 2), rec);
        }
        log << mode << " N=" << n << " replicate=" << r << " wall_ms=" << rec.wall_ms
            << " repetitions=" << rec.repetitions << '\n';
        report.records.push_back(rec);
      }
    }
  }

  const bool fit_allowed = grid.size() >= 4 && static_cast<double>(grid.back()) >= 10.0 * grid.front();
  if (!fit_allowed) {
    ++report.warnings;
    log << "warning: exponent fit needs at least 4 distinct N values spanning a decade; "
           "raw times written without a fit\n";
  }
  for (const auto& mode : spec.engines) {
    std::optional<double> exponent;
    if (fit_allowed) {
      std::vector<double> lx, ly;
      for (auto n : grid) {
        std::vector<double> times;
        for (const auto& rec : report.records)
          if (rec.mode == mode && rec.n == n) times.push_back(rec.wall_ms);
        std::sort(times.begin(), times.end());
        const std::size_t m = times.size();
        const double median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
        lx.push_back(std::log(static_cast<double>(n)));
        ly.push_back(std::log(median));
      }
      exponent = stats::least_squares(lx, ly).slope;
      log << mode << " exponent=" << *exponent << '\n';
    }
    report.exponents.emplace_back(mode, exponent);
  }

  {
    auto out = open_csv(spec, "timing.csv");
    out << "mode,N,replicate,repetitions,wall_time_ms,sequence_time_ms,resample_time_ms,"
           "simulate_time_ms\n";
    for (const auto& r : report.records)
      out << r.mode << ',' << r.n << ',' << r.replicate << ',' << r.repetitions << ','
          << format_real(r.wall_ms) << ',' << format_real(r.sequence_ms) << ','
          << format_real(r.resample_ms) << ',' << format_real(r.simulate_ms) << '\n';
  }
  {
    auto out = open_csv(spec, "timing_exponents.csv");
    out << "mode,distinct_N,exponent\n";
    for (const auto& [mode, exponent] : report.exponents)
      out << mode << ',' << grid.size() << ',' << real_or_na(exponent) << '\n';
  }
  return report;
}

// ---------------------------------------------------------------------------

void cmd_dpm_run(const ExperimentSpec& spec, std::ostream& log) {
  const KeyValueConfig config = with_defaults(spec.model, dpm_defaults());
  const auto data = dpm_data(config);
  const auto model = DpmModel::from_config(config);
  const auto result = run_dpm_filter(
      data, model,
      dpm_options(config, filter_engine_from_string(spec.engines.front()), spec.n_values.front(),
                  spec.seed_base));
  {
    auto out = open_csv(spec, "dpm_evidence.csv");
    out << "t,y,log_evidence\n";
    for (std::size_t t = 0; t < result.log_evidence_path.size(); ++t)
      out << t + 1 << ',' << format_real(data[t]) << ',' << format_real(result.log_evidence_path[t])
          << '\n';
  }
  {
    auto out = open_csv(spec, "dpm_k_posterior.csv");
    out << "k,probability\n";
    for (std::size_t k = 1; k < result.k_posterior.size(); ++k)
      out << k << ',' << format_real(result.k_posterior[k]) << '\n';
  }
  log << "log evidence " << format_real(result.log_evidence) << " over " << data.size()
      << " observations\n";
}

void cmd_abc_run(const ExperimentSpec& spec, std::ostream& log) {
  const auto observed = abc_observed_data(spec.model);
  const auto config = abc_config_for(spec.model, spec.n_values.front());
  const std::string& engine = spec.engines.front();
  const auto start = Clock::now();
  const auto result =
      run_abc(config, observed, abc_options(spec.model, abc_engine_from_string(engine), spec.seed_base));
  const double wall = elapsed_ms(start);
  {
    auto out = open_csv(spec, "abc_telemetry.csv");
    out << "replicate,t,i,theta,omega,attempts\n";
    for (const auto& pop : result.history)
      for (std::size_t i = 0; i < pop.size(); ++i)
        out << 0 << ',' << pop.t << ',' << i << ',' << format_real(pop.thetas[i]) << ','
            << format_real(pop.omegas[i]) << ',' << pop.particle_attempts[i] << '\n';
  }
  {
    auto out = open_csv(spec, "abc_iterations.csv");
    out << "t,epsilon,acceptance_rate,attempts,simulator_calls,kernel_variance\n";
    for (const auto& pop : result.history)
      out << pop.t << ',' << format_real(pop.epsilon) << ',' << format_real(pop.acceptance_rate())
          << ',' << pop.attempts << ',' << pop.simulator_calls << ',' << format_real(pop.sigma)
          << '\n';
  }
  {
    auto out = open_csv(spec, "abc_summary.csv");
    out << "replicate,engine,posterior_mean,posterior_var,total_sim_calls,wall_time_ms\n";
    out << 0 << ',' << engine << ',' << format_real(result.posterior_mean) << ','
        << format_real(result.posterior_var) << ',' << result.total_simulator_calls << ','
        << format_real(wall) << '\n';
  }
  log << "posterior mean " << format_real(result.posterior_mean) << ", variance "
      << format_real(result.posterior_var) << ", simulator calls " << result.total_simulator_calls
      << '\n';
}

void write_schema(const std::filesystem::path& dir) {
  std::ofstream out(dir / "SCHEMA.md", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "SCHEMA.md").string());
  out << R"(# Output schema

Every CSV begins with one comment line

    # spec: <experiment, engines, N grid, replicates, seed, bootstrap, config> version: <toolkit version>

followed by a header row. Missing values are written as `NA`.

## variance_replicates.csv (abc-variance, dpm-variance)

| column | meaning |
|---|---|
| replicate | replicate index; the run seed is derived from the seed base and this index only, so engines share seeds |
| engine | `mc`/`pqmc` (ABC) or `smc`/`sqmc` (DPM) |
| N | particle count |
| posterior_mean | ABC: weighted posterior mean of theta in the final population |
| posterior_var | ABC: weighted posterior variance of theta |
| total_sim_calls | ABC: simulator invocations over all iterations |
| evidence | DPM: evidence estimate (exp of log_evidence) |
| log_evidence | DPM: log of the evidence estimate |
| status | `ok`, or `abort: <reason>` for a replicate excluded from the summary |

## variance_summary.csv

| column | meaning |
|---|---|
| engine, N | as above |
| replicates | successful replicates |
| failures | aborted replicates |
| mean | mean of the estimates (posterior mean or evidence) |
| variance | unbiased variance of the estimates across replicates |
| baseline | first engine listed; ratios are relative to it |
| ratio | variance(baseline) / variance(engine); NA for the baseline row and when undefined |
| ci_lower, ci_upper | 95% percentile bootstrap interval of the ratio |

## timing.csv (timing-scale)

| column | meaning |
|---|---|
| mode | `mc`, `qmc-incremental` or `qmc-batch` |
| N | particle count |
| replicate | replicate index |
| repetitions | inner repetitions averaged (raised automatically when one run is under 50 ms) |
| wall_time_ms | wall time of one run, milliseconds |
| sequence_time_ms | part of the wall time spent producing uniforms |
| resample_time_ms | part spent choosing ancestors and computing weights |
| simulate_time_ms | part spent in the simulator, summary and distance |

Timings are measurements and differ between reruns. Apart from the `wall_time_ms` columns
and the timing files, every CSV is byte-identical for the same experiment settings and seed base.

## timing_exponents.csv

| column | meaning |
|---|---|
| mode | as above |
| distinct_N | number of distinct N values |
| exponent | least-squares slope of log(median wall time) against log(N); NA when fewer than 4 distinct N or less than a decade |

## dpm_evidence.csv (dpm-run)

| column | meaning |
|---|---|
| t | time step |
| y | observation at t |
| log_evidence | log evidence estimate of y_1..y_t |

## dpm_k_posterior.csv

| column | meaning |
|---|---|
| k | number of clusters |
| probability | filter estimate of P(k_T = k) |

## abc_telemetry.csv (abc-run)

| column | meaning |
|---|---|
| replicate | always 0 for a single run |
| t | iteration |
| i | particle index |
| theta | accepted parameter value |
| omega | normalized weight |
| attempts | proposals drawn for this particle, including out-of-support ones |

## abc_iterations.csv

| column | meaning |
|---|---|
| t | iteration |
| epsilon | tolerance |
| acceptance_rate | accepted / attempts |
| attempts | proposals drawn in the iteration |
| simulator_calls | simulator invocations in the iteration |
| kernel_variance | perturbation variance computed from this population |

## abc_summary.csv

| column | meaning |
|---|---|
| replicate | always 0 for a single run |
| engine | `pqmc` or `mc` |
| posterior_mean, posterior_var | weighted moments of theta in the final population |
| total_sim_calls | simulator invocations over all iterations |
| wall_time_ms | wall time of the run (a measurement, not reproducible) |
)";
}

void run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(spec.output_dir, ec);
  if (ec || !std::filesystem::is_directory(spec.output_dir))
    throw UsageError("output directory " + spec.output_dir.string() + " is not writable");
  {
    const auto probe = spec.output_dir / ".write_probe";
    std::ofstream p(probe);
    if (!p) throw UsageError("output directory " + spec.output_dir.string() + " is not writable");
    p.close();
    std::filesystem::remove(probe, ec);
  }
  write_schema(spec.output_dir);
  log << "# " << spec.describe() << '\n';
  switch (spec.experiment) {
    case Experiment::AbcVariance:
    case Experiment::DpmVariance: cmd_variance(spec, log); break;
    case Experiment::TimingScale: cmd_timing(spec, log); break;
    case Experiment::DpmRun: cmd_dpm_run(spec, log); break;
    case Experiment::AbcRun: cmd_abc_run(spec, log); break;
  }
}

}  // namespace sqmc::bench
