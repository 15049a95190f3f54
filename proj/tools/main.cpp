#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "spinkick/oracle.hpp"
#include "spinkick/sweep.hpp"
#include "spinkick/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCellFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonOpts {
  std::string config;
  std::string out;
  int workers = 0;
  std::uint64_t seed_override = 0;
  bool have_seed_override = false;
};

int run_execute(const CommonOpts& opts, bool allow_sweep) {
  spinkick::RunConfig config = spinkick::load_config(opts.config);
  if (!allow_sweep && !config.sweep.empty())
    throw spinkick::ConfigError(
        "config: sweep axes present; use the sweep subcommand");
  std::optional<std::filesystem::path> out;
  if (!opts.out.empty()) out = opts.out;
  std::optional<int> workers;
  if (opts.workers > 0) workers = opts.workers;
  std::optional<std::uint64_t> seed;
  if (opts.have_seed_override) seed = opts.seed_override;

  const spinkick::ExecutionResult result =
      spinkick::execute(config, out, workers, seed);
  std::cout << result.total_cells - result.failed_cells << "/"
            << result.total_cells << " cells succeeded; outputs in "
            << result.output_dir.string() << "\n";
  return result.failed_cells == 0 ? kExitOk : kExitCellFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spinkick: two-frequency driven dipolar spin-1/2 ensemble "
               "simulator"};
  app.set_version_flag("--version", spinkick::kVersion);
  app.require_subcommand(1);

  CommonOpts opts;

  auto add_common = [&](CLI::App* cmd, bool with_config = true) {
    if (with_config)
      cmd->add_option("--config", opts.config, "config file (JSON)")
          ->required();
    cmd->add_option("--out", opts.out, "output directory or file");
    cmd->add_option("--workers", opts.workers, "worker thread count");
    cmd->add_option("--seed-override", opts.seed_override,
                    "replace every configured seed, derived deterministically")
        ->each([&](const std::string&) { opts.have_seed_override = true; });
  };

  CLI::App* graph_cmd =
      app.add_subcommand("graph", "generate a spin graph and write its file");
  add_common(graph_cmd);

  CLI::App* run_cmd =
      app.add_subcommand("run", "execute a single run (no sweep axes)");
  add_common(run_cmd);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "execute a parameter sweep in parallel");
  add_common(sweep_cmd);

  CLI::App* analyze_cmd = app.add_subcommand(
      "analyze", "recompute lifetimes/spectra/fits from a run directory");
  std::string analyze_dir;
  double branch_center = 0.0;
  bool have_branch = false;
  std::string rectify = "absolute";
  analyze_cmd->add_option("--dir", analyze_dir, "run output directory")
      ->required();
  analyze_cmd->add_option("--branch-center", branch_center,
                          "gamma value of the stable point for heating fits")
      ->each([&](const std::string&) { have_branch = true; });
  analyze_cmd->add_option("--rectify", rectify, "absolute|none");

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "run the invariant battery and print measured defects");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (graph_cmd->parsed()) {
      spinkick::RunConfig config = spinkick::load_config(opts.config);
      if (config.graph.file.empty() && config.graph.count < 1)
        throw spinkick::ConfigError("config: graph section incomplete");
      spinkick::SpinGraph graph;
      spinkick::CouplingSet couplings;
      if (!config.graph.file.empty()) {
        auto loaded = spinkick::load_graph(config.graph.file);
        graph = loaded.first;
        couplings = loaded.second;
      } else {
        const std::uint64_t seed =
            opts.have_seed_override ? opts.seed_override : config.graph.seed;
        graph = spinkick::generate_graph(config.graph.count, config.graph.r_min,
                                         config.graph.r_max, seed,
                                         config.graph.options);
        couplings = spinkick::compute_couplings(graph);
        if (config.disorder) {
          const double mean = config.disorder->absolute
                                  ? config.disorder->mean
                                  : config.disorder->mean_factor *
                                        couplings.median_b;
          const double sigma = config.disorder->absolute
                                   ? config.disorder->sigma
                                   : config.disorder->sigma_factor *
                                         couplings.median_b;
          couplings = spinkick::sample_disorder(couplings, mean, sigma,
                                                config.disorder->seed);
        }
      }
      const std::filesystem::path out =
          opts.out.empty() ? std::filesystem::path("graph.txt")
                           : std::filesystem::path(opts.out);
      spinkick::save_graph(graph, couplings, out);
      std::cout << "graph with " << graph.count << " spins written to "
                << out.string() << " (median |b| = " << couplings.median_b
                << ")\n";
      return kExitOk;
    }
    if (run_cmd->parsed()) return run_execute(opts, false);
    if (sweep_cmd->parsed()) return run_execute(opts, true);
    if (analyze_cmd->parsed()) {
      spinkick::AnalysisSpec analysis;
      analysis.rectify = rectify == "none" ? spinkick::Rectify::None
                                           : spinkick::Rectify::Absolute;
      if (have_branch) analysis.branch_center = branch_center;
      spinkick::analyze_directory(analyze_dir, analysis);
      std::cout << "analysis written to "
                << (std::filesystem::path(analyze_dir) / "analysis.txt").string()
                << "\n";
      return kExitOk;
    }
    if (verify_cmd->parsed()) {
      const spinkick::VerifyReport report = spinkick::run_verification();
      report.print(std::cout);
      return report.all_pass() ? kExitOk : kExitCellFailure;
    }
  } catch (const spinkick::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCellFailure;
  }
  return kExitConfigError;
}
