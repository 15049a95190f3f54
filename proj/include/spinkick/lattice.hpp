#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace spinkick {

// Pseudo-random 3D spin graph. Positions are measured in units of
// cbrt(mu0*hbar*gamma_n^2); with hbar = 1 the dipolar couplings below are
// angular frequencies.
struct SpinGraph {
  int count = 0;  // L
  std::vector<std::array<double, 3>> positions;
  double r_min = 0.0;
  double r_max = 0.0;
  std::uint64_t seed = 0;
};

struct GraphOptions {
  // Proposals are drawn uniformly from a cube of side
  // r_max * ceil(L^(1/3)) * box_factor centered on the first spin.
  double box_factor = 2.0;
  // Abort after this many rejected proposals.
  std::uint64_t max_rejections = 1000000;
};

// Incremental accept/reject generation: a proposal is kept iff it is at
// least r_min away from every accepted spin and within r_max of at least one.
// Identical inputs give bit-identical positions. Throws std::runtime_error
// ("graph infeasible for given parameters") when the rejection budget is
// exhausted.
SpinGraph generate_graph(int count, double r_min, double r_max,
                         std::uint64_t seed, const GraphOptions& options = {});

// Symmetric dipolar coupling table plus on-site disorder fields.
struct CouplingSet {
  int count = 0;
  std::vector<double> b;  // row-major count*count, b_jj = 0, b_jk = b_kj
  std::array<double, 3> field_axis{0.0, 0.0, 1.0};
  double median_b = 0.0;       // median |b_jk| over pairs with |r_jk| < r_max
  std::vector<double> c;       // on-site fields, zero until sampled
  std::uint64_t disorder_seed = 0;

  double coupling(int j, int k) const { return b[static_cast<std::size_t>(j) * count + k]; }
};

// b_jk = (3 cos^2(alpha_jk) - 1) / (4 pi |r_jk|^3) with alpha_jk the angle
// between the interspin vector and the field axis. Fields are left at zero.
CouplingSet compute_couplings(const SpinGraph& graph,
                              std::array<double, 3> field_axis = {0.0, 0.0, 1.0});

// Fills c_j with i.i.d. normal(mean, sigma) variates, reproducible from seed.
CouplingSet sample_disorder(const CouplingSet& couplings, double mean,
                            double sigma, std::uint64_t seed);

// Characteristic interaction scale J = 1/tau_d: the x-polarized product state
// is evolved under H = H_dd + H_z alone, <x> is sampled at multiples of dt,
// and tau_d is the first downward 1/e crossing (linear interpolation between
// samples). Throws when no crossing occurs before t_max.
double estimate_coupling_scale(const CouplingSet& couplings, double dt,
                               double t_max);

// Versioned plain-text record: header (L, r_min, r_max, seed, unit note),
// then positions, coupling table, and c_j. Values are printed with 17
// significant digits so reloading reproduces every double bit-exactly.
void save_graph(const SpinGraph& graph, const CouplingSet& couplings,
                const std::filesystem::path& path);
std::pair<SpinGraph, CouplingSet> load_graph(const std::filesystem::path& path);

}  // namespace spinkick
