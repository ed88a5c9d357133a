#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sqmc/config.hpp"
#include "sqmc/stats.hpp"

namespace sqmc::bench {

inline constexpr const char* kVersion = "sqmc-toolkit 1.0.0";

enum class Experiment { AbcVariance, DpmVariance, TimingScale, DpmRun, AbcRun };
std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

/// Bad command line or configuration; maps to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentSpec {
  Experiment experiment = Experiment::AbcVariance;
  std::vector<std::string> engines;
  std::vector<std::size_t> n_values;
  std::size_t replicates = 1;
  std::uint64_t seed_base = 0;
  std::filesystem::path output_dir;
  KeyValueConfig model;
  /// Worker threads for replicate dispatch; timing always uses one.
  std::size_t threads = 1;
  std::size_t bootstrap_resamples = 10000;

  /// Engines and N grid default per experiment when left empty.
  void apply_defaults();
  /// Throws UsageError.
  void validate() const;
  /// Deterministic one-line rendering recorded in every CSV.
  std::string describe() const;
};

struct ReplicateEstimate {
  std::string engine;
  std::size_t n = 0;
  std::size_t replicate = 0;
  bool ok = false;
  double estimate = 0.0;   // posterior mean (ABC) or evidence (DPM)
  double secondary = 0.0;  // posterior variance (ABC) or log evidence (DPM)
  std::size_t simulator_calls = 0;
  double wall_ms = 0.0;
  std::string error;
};

struct VarianceSummary {
  std::string engine;
  std::size_t n = 0;
  std::size_t ok = 0;
  std::size_t failures = 0;
  double mean = 0.0;
  double variance = 0.0;
  /// var(baseline) / var(engine) with a bootstrap interval; absent for the
  /// baseline row itself and when fewer than two replicates succeeded.
  std::optional<stats::RatioEstimate> ratio;
  std::string baseline;
};

struct VarianceReport {
  std::vector<ReplicateEstimate> replicates;
  std::vector<VarianceSummary> summary;
  std::size_t warnings = 0;
};

/// abc-variance / dpm-variance. Writes variance_replicates.csv and
/// variance_summary.csv into the output directory.
VarianceReport cmd_variance(const ExperimentSpec& spec, std::ostream& log);

struct TimingRecord {
  std::string mode;
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::size_t repetitions = 1;
  double wall_ms = 0.0;
  double sequence_ms = 0.0;
  double resample_ms = 0.0;
  double simulate_ms = 0.0;
};

struct TimingReport {
  std::vector<TimingRecord> records;
  /// Fitted log-log exponent per mode; empty when the N grid does not allow
  /// a fit (fewer than 4 distinct values or less than a decade).
  std::vector<std::pair<std::string, std::optional<double>>> exponents;
  std::size_t warnings = 0;
};

/// timing-scale. Modes: mc, qmc-incremental, qmc-batch. Writes timing.csv
/// and timing_exponents.csv.
TimingReport cmd_timing(const ExperimentSpec& spec, std::ostream& log);

/// dpm-run: dpm_evidence.csv (t, log evidence) and dpm_k_posterior.csv.
void cmd_dpm_run(const ExperimentSpec& spec, std::ostream& log);
/// abc-run: abc_telemetry.csv and abc_summary.csv.
void cmd_abc_run(const ExperimentSpec& spec, std::ostream& log);

/// Dispatches on spec.experiment, creates the output directory and writes
/// SCHEMA.md. Exceptions propagate.
void run_experiment(const ExperimentSpec& spec, std::ostream& log);

void write_schema(const std::filesystem::path& dir);

/// One real per line; blank lines and '#' comments skipped.
std::vector<double> read_observations(const std::filesystem::path& path);

/// The five-point dataset used for the exactness and variance checks.
std::vector<double> default_dpm_data();

/// Observed series for the ABC toy: the `data` file when given, otherwise
/// synthetic from theta_true (0.3) and data_seed (12345).
std::vector<double> abc_observed_data(const KeyValueConfig& config);

/// Worker count: BENCH_THREADS when set, else hardware concurrency.
std::size_t default_thread_count();

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace sqmc::bench
