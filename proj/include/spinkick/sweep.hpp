#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinkick/analysis.hpp"
#include "spinkick/engine.hpp"
#include "spinkick/lattice.hpp"

namespace spinkick {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GraphSpec {
  std::filesystem::path file;  // non-empty: load instead of generating
  int count = 0;
  double r_min = 0.0;
  double r_max = 0.0;
  std::uint64_t seed = 0;
  GraphOptions options;
};

struct DisorderSpec {
  bool absolute = false;    // mean/sigma given directly
  double mean = 0.0;        // used when absolute
  double sigma = 0.0;
  double mean_factor = 1.0;   // otherwise in units of median_b
  double sigma_factor = 10.0;
  std::uint64_t seed = 0;
};

// Sampling control for the J = 1/tau_d estimate, in units of 1/median_b.
struct ScaleSpec {
  double dt_factor = 0.02;
  double t_max_factor = 30.0;
};

struct ProtocolSpec {
  DriveProtocol base;       // tau filled in per graph when tau_in_scale_units
  bool tau_in_scale_units = false;  // tau_value is tau*J
  double tau_value = 0.0;
};

struct SweepSpec {
  std::vector<double> gammas;
  std::vector<long> fast_pulses;
  std::vector<double> taus;
  bool taus_in_scale_units = false;
  std::vector<std::uint64_t> seeds;  // re-seeds graph, disorder and noise

  bool empty() const {
    return gammas.empty() && fast_pulses.empty() && taus.empty() &&
           seeds.empty();
  }
};

struct AnalysisSpec {
  bool heating = true;
  bool spectrum = true;
  Rectify rectify = Rectify::Absolute;
  double rigidity_threshold = 0.2;
  std::optional<double> branch_center;  // enables the combined heating fit
};

struct RunConfig {
  int schema_version = 1;
  GraphSpec graph;
  std::optional<DisorderSpec> disorder;
  ScaleSpec scale;
  ProtocolSpec protocol;
  HamiltonianChoice hamiltonian = HamiltonianChoice::FullSystem;
  SweepSpec sweep;
  AnalysisSpec analysis;
  int workers = 0;  // 0: hardware concurrency
  std::string output_dir = "out";
  std::string echo;  // canonical JSON echo of the validated config
};

// Strict parse: schema_version checked, unknown keys rejected, seeds
// mandatory. Throws ConfigError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);

struct ExecutionResult {
  int total_cells = 0;
  int failed_cells = 0;
  std::filesystem::path output_dir;
};

// Runs every cell of the sweep (static partition over workers), writes the
// deterministic artifact set (graph files, per-cell series CSVs, grid CSVs,
// fits manifest, run manifest) and records per-cell failures instead of
// aborting the sweep.
ExecutionResult execute(const RunConfig& config,
                        const std::optional<std::filesystem::path>& out_override = {},
                        std::optional<int> workers_override = {},
                        std::optional<std::uint64_t> seed_override = {});

// Parses a series CSV written by TimeSeries::write_csv.
TimeSeries read_series_csv(const std::filesystem::path& path);

// Recomputes lifetimes/spectra/fits from the per-cell CSVs of a previous run.
int analyze_directory(const std::filesystem::path& dir,
                      const AnalysisSpec& analysis);

}  // namespace spinkick
