#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinkick/engine.hpp"

namespace spinkick {

// One value per Floquet cycle extracted from a TimeSeries.
struct CycleSeries {
  std::vector<double> kick_index;  // global kick count at the sample
  std::vector<double> time;
  std::vector<double> value;
  long fast_pulses = 1;  // N
  double period = 0.0;   // nominal T = N tau
};

enum class CycleObservable {
  PreKickSample,  // sample taken immediately before each slow kick
  CycleMean,      // mean of the fast-kick samples within the cycle
};

// Derives a per-cycle series; CycleMean requires fast-kick resolution.
CycleSeries cycle_series(const TimeSeries& series, CycleObservable observable,
                         Axis axis = Axis::X);

enum class Rectify { None, Absolute };

struct Lifetime {
  double kicks = 0.0;
  double time = 0.0;
  double cycles = 0.0;
};

// First downward crossing of threshold * |initial value|, linearly
// interpolated between cycle samples. Returns nullopt when the series ends
// above threshold ("threshold not reached") -- reported, never extrapolated.
std::optional<Lifetime> heating_time(const CycleSeries& series,
                                     double threshold = 0.36787944117144233,
                                     Rectify rectify = Rectify::None);

struct HeatingFit {
  double g = 0.0;
  double lambda = 0.0;      // exponent
  double gamma_min = 0.0;   // per-kick floor rate
  double residual_norm = 0.0;
  long fast_pulses = 1;
};

// Least-squares fit of Gamma = g/N eps^lambda + Gamma_min to per-kick rates
// Gamma_i = 1/lifetime_kicks_i. Gamma_min is profiled by a grid-then-refine
// 1-D search over [0, min Gamma] with an inner closed-form linear fit of
// log(Gamma - Gamma_min) vs log eps. Needs >= 4 points with distinct eps.
HeatingFit fit_combined_heating(std::span<const double> eps,
                                std::span<const double> lifetime_kicks,
                                long fast_pulses);

struct PowerLawFit {
  double exponent = 0.0;
  double std_error = 0.0;
  double log_prefactor = 0.0;
};

// Slope of the least-squares line in log-log space; positive data only.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

struct Spectrum {
  double period = 0.0;                // T
  std::vector<double> omega;          // 2 pi k / (M T), k = 0..M-1
  std::vector<std::complex<double>> amplitude;

  std::vector<double> magnitude() const;
  // |amplitude| at the bin closest to omega = pi/T.
  double subharmonic_peak() const;
  double zero_frequency_peak() const;
};

// <O>(omega_k) = sum_j e^{-i omega_k j T} <O>(jT), exactly as a plain DFT.
Spectrum stroboscopic_spectrum(std::span<const double> values, double period);

// Half-width of the contiguous gamma interval around `center` where the
// pi/T-peak magnitude stays >= threshold * (its maximum over the grid);
// edges located by linear interpolation between grid points. Returns 0 when
// the peak is absent at the center.
double rigidity_extent(std::span<const double> gammas,
                       std::span<const double> peak_magnitudes,
                       double threshold = 0.2,
                       double center = std::numbers::pi);

// Four-quadrant phase atan2(y, x) in (-pi, pi]; nullopt when both components
// are below 1e-12 (undefined phase).
std::optional<double> phase_estimate(double x, double y);

// -- gamma sweeps ---------------------------------------------------------

struct PhaseCell {
  double gamma = 0.0;
  std::string error;                  // empty on success
  std::vector<double> cycle_abs_x;    // |<x>| pre-kick, per cycle
  std::vector<double> cycle_mean_x;   // mean <x> within each cycle
  Spectrum spectrum;                  // of the per-cycle means
  std::optional<Lifetime> lifetime;   // rectified 1/e lifetime
};

struct PhaseDiagram {
  std::vector<PhaseCell> cells;       // one per gamma, input order
  long cycles = 0;
  long fast_pulses = 1;

  // rows = cycles, columns = gamma, header row of gamma values
  void write_heatmap_csv(std::ostream& out) const;
  // rows = frequency bins, columns = gamma
  void write_spectra_csv(std::ostream& out) const;
  void write_lifetimes_csv(std::ostream& out) const;
};

// One run_protocol per gamma (parallel over `workers` threads, deterministic
// assembly order; per-cell errors are recorded, not fatal).
PhaseDiagram phase_diagram(const CouplingSet& couplings,
                           const DriveProtocol& protocol_template,
                           std::span<const double> gammas,
                           HamiltonianChoice choice, int workers = 1);

}  // namespace spinkick
