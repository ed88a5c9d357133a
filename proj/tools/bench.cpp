// bench: runs the variance, timing and single-run experiments and writes CSV
// output; `bench plot` renders a log-log SVG from a timing or variance CSV.
//
// Exit codes: 0 success, 1 usage error, 2 runtime abort.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sqmc/bench.hpp"
#include "sqmc/config.hpp"
#include "sqmc/plot.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : sqmc::split_list(text)) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw sqmc::bench::UsageError("bad N value '" + item + "'");
    }
    if (used != item.size() || v <= 0) throw sqmc::bench::UsageError("bad N value '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential quasi-Monte Carlo experiment harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, n_list, engine_list;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;

  std::vector<CLI::App*> experiments;
  for (const char* name : {"abc-variance", "dpm-variance", "timing-scale", "dpm-run", "abc-run"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config_path, "key = value model configuration file");
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "seed base");
    sub->add_option("--replicates", replicates, "independent replicates per (engine, N)");
    sub->add_option("--n", n_list, "comma-separated particle counts");
    sub->add_option("--engine", engine_list, "comma-separated engines or timing modes");
    experiments.push_back(sub);
  }

  std::string plot_csv, plot_out;
  auto* plot = app.add_subcommand("plot", "render a log-log SVG from a timing or variance CSV");
  plot->add_option("csv", plot_csv, "input CSV")->required();
  plot->add_option("--out", plot_out, "output SVG (default: input with .svg extension)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  if (plot->parsed()) {
    try {
      std::filesystem::path out = plot_out;
      if (out.empty()) out = std::filesystem::path(plot_csv).replace_extension(".svg");
      sqmc::cmd_plot(plot_csv, out);
      std::cout << "wrote " << out.string() << '\n';
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "bench plot: " << e.what() << '\n';
      return kRuntime;
    }
  }

  sqmc::bench::ExperimentSpec spec;
  try {
    for (auto* sub : experiments)
      if (sub->parsed()) spec.experiment = sqmc::bench::experiment_from_string(sub->get_name());
    if (!config_path.empty()) spec.model = sqmc::KeyValueConfig::from_file(config_path);
    spec.output_dir = out_dir;
    spec.seed_base = seed ? *seed : spec.model.get_uint("seed", 0);
    spec.replicates = replicates ? *replicates : spec.model.get_uint("replicates", 1);
    if (!n_list.empty()) spec.n_values = parse_sizes(n_list);
    if (!engine_list.empty()) spec.engines = sqmc::split_list(engine_list);
    spec.threads = sqmc::bench::default_thread_count();
    spec.apply_defaults();
    spec.validate();
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return kUsage;
  }

  try {
    sqmc::bench::run_experiment(spec, std::cout);
  } catch (const sqmc::bench::UsageError& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "bench: aborted: " << e.what() << '\n';
    return kRuntime;
  }
  return 0;
}
