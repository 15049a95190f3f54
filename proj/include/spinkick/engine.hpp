#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spinkick/operators.hpp"

namespace spinkick {

using cplx = std::complex<double>;

// 2^L complex amplitudes in the z product basis; bit j of the index is spin
// j, bit value 0 = up.
struct StateVector {
  int site_count = 0;
  std::vector<cplx> amplitudes;

  double norm() const;
};

StateVector polarized_state(int site_count, Axis axis, int sign = +1);
// (|->...->| ± |<-...<-|)/sqrt(2): symmetric/antisymmetric superposition of
// the two fully x-polarized product states.
StateVector cat_state(int site_count, int sign);

// Matrix-free H|psi> kernel. Terms are compiled once: pure-z terms collapse
// into a single precomputed diagonal; the remaining one- and two-site terms
// become per-site(-pair) programs of sparse in-cell matrix entries applied
// in one branch-free pass per site pair; higher-weight Pauli strings fall
// back to a bit-mask pass. Cost O(#terms * 2^L) per apply with a fixed
// accumulation order (no dependence on thread count).
class CompiledOperator {
 public:
  explicit CompiledOperator(const TermOperator& op);

  int site_count() const { return site_count_; }
  std::size_t dimension() const { return std::size_t{1} << site_count_; }
  // out = H * in; in and out must not alias.
  void apply(std::span<const cplx> in, std::span<cplx> out) const;

 private:
  struct CellEntry {
    std::uint8_t dst = 0;  // local pattern index within the cell
    std::uint8_t src = 0;
    cplx coeff{0.0, 0.0};
  };
  struct PairProgram {
    int low_bit = 0;
    int high_bit = 0;  // == low_bit for single-site programs
    std::vector<CellEntry> entries;
  };
  struct MaskTerm {
    std::uint64_t flip_mask = 0;
    std::uint64_t sign_mask = 0;
    cplx prefactor{0.0, 0.0};
  };

  int site_count_ = 0;
  std::vector<double> diagonal_;
  std::vector<PairProgram> pairs_;
  std::vector<PairProgram> singles_;
  std::vector<MaskTerm> generic_;
};

// e^{-i t_d H} applied to the +x polarized state.
StateVector evolved_state(int site_count, double t_d, const TermOperator& h,
                          double tol = 1e-12);

// Applies the product of identical single-spin rotations
// e^{-i angle axis.I_j} (active convention: a gamma kick about z maps
// <x> -> cos gamma, <y> -> sin gamma).
void apply_collective_rotation(StateVector& state, const RotationSpec& rot);

struct EvolveOptions {
  double tol = 1e-10;    // 2-norm accuracy target per step
  int max_krylov = 64;   // subspace budget
  // Re-project the Lanczos residual on the full basis each iteration. The
  // three-term recurrence alone holds orthogonality well at the small
  // subspace sizes short drive steps need; the full pass is kept available
  // for long evolutions.
  bool reorthogonalize = false;
};

// psi <- e^{-i duration H} psi via an adaptive Lanczos/Krylov approximation;
// throws "step too large; reduce duration or raise budget" on
// non-convergence and fails on norm drift >= 1e-10 (renormalizes below).
void evolve_step(StateVector& state, const CompiledOperator& h,
                 double duration, const EvolveOptions& options = {});

// (<x>, <y>, <z>) = (2/L)(<Ix>, <Iy>, <Iz>)
std::array<double, 3> measure_magnetization(const StateVector& state);

enum class SlowAxis : std::uint8_t { Y, Z };
enum class MeasureEvery : std::uint8_t { FastKick, FloquetCycle };
enum class HamiltonianChoice : std::uint8_t { FullSystem, IdealizedLeading };

std::array<double, 3> slow_axis_vector(SlowAxis axis);

// All drive parameters of the two-frequency protocol. One Floquet cycle is
// N x (theta kick about x, evolve tau+dtau) followed by one gamma kick about
// the slow axis; the idealized mode evolves N(tau+dtau) under the leading
// effective Hamiltonian instead of the fast train.
struct DriveProtocol {
  double theta = std::numbers::pi / 2;
  double gamma = 0.0;
  double tau = 0.0;
  long fast_pulses = 1;  // N
  long cycles = 1;       // M
  SlowAxis slow_axis = SlowAxis::Y;
  double noise_fraction = 0.0;  // delta: dtau uniform in [-delta tau, +delta tau]
  std::uint64_t noise_seed = 0;
  MeasureEvery measure_every = MeasureEvery::FloquetCycle;

  void validate() const;  // N >= 1, M >= 1, tau > 0, 0 <= delta < 1
};

struct TimeRecord {
  long kick_index = 0;   // global kick count (fast and slow kicks alike)
  long cycle_index = 0;  // 1-based Floquet cycle
  double time = 0.0;     // accumulated evolution time
  double x = 0.0, y = 0.0, z = 0.0;
  double norm = 0.0;
};

struct TimeSeries {
  std::vector<TimeRecord> records;
  DriveProtocol protocol;  // echo
  HamiltonianChoice hamiltonian = HamiltonianChoice::FullSystem;
  std::uint64_t graph_seed = 0;  // provenance
  int site_count = 0;
  double coupling_scale = 0.0;  // J used to set tau, 0 if unset

  // header with full provenance, then
  // kick_index,cycle_index,time,x,y,z,norm
  void write_csv(std::ostream& out) const;
};

// Executes M cycles of the drive. Fast-kick measurement records one sample
// after every evolution segment (the acquisition windows between pulses) and
// one after each slow kick; per-cycle measurement records once per cycle,
// immediately before the slow kick. Fresh dtau noise is drawn per fast
// segment in the full mode and per cycle in the idealized mode.
// stop_below > 0 truncates the run once the rectified pre-kick sample falls
// below stop_below * |first pre-kick sample| (an early exit for lifetime
// sweeps; the recorded prefix is unchanged).
TimeSeries run_protocol(const CouplingSet& couplings,
                        const DriveProtocol& protocol,
                        HamiltonianChoice choice,
                        const EvolveOptions& options = {1e-12, 64},
                        const StateVector* initial = nullptr,
                        double stop_below = 0.0);

}  // namespace spinkick
