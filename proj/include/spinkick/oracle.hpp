#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "spinkick/engine.hpp"
#include "spinkick/operators.hpp"

namespace spinkick {

// Brute-force verification engines. Dense matrices live only here; every
// result is deterministic and independent of thread count. Clarity over
// speed.

struct DenseOperator {
  int site_count = 0;
  Eigen::MatrixXcd matrix;
};

inline constexpr int kDenseMaxSites = 10;

// Exact Kronecker-product assembly of a TermOperator (L <= 10).
DenseOperator dense_assemble(const TermOperator& op);

// e^{-i duration H} via eigendecomposition (input must be Hermitian).
DenseOperator dense_propagator(const DenseOperator& h, double duration);

// (1/N) sum_{n=1..N} U_x^n H U_x^-n assembled densely (L <= 8).
DenseOperator toggling_sum(const TermOperator& h, long pulses, double theta);

// Dense 2x2 of e^{-i angle axis.sigma/2}.
Eigen::Matrix2cd dense_single_spin_rotation(const RotationSpec& rot);
// Collective rotation as a Kronecker power.
DenseOperator dense_collective_rotation(int site_count, const RotationSpec& rot);

Eigen::VectorXcd dense_state(const StateVector& state);

struct PairingReport {
  // Worst distance to a pi/T-shifted partner over the magnetization-carrying
  // eigenstates (<Ix^2> > 1/2); the zero-magnetization sector hosts unpaired
  // parity eigenstates and is reported separately.
  double max_defect = 0.0;
  double unrestricted_defect = 0.0;  // same measure over every eigenstate
  std::size_t paired_states = 0;
  std::vector<double> eigenphases;   // all, sorted
  std::string format() const;
};

// Quasi-energy pairing of a PDTC Floquet unitary: eigenphases are extracted,
// and for every magnetization-carrying eigenstate the distance to its best
// partner shifted by exactly pi (i.e. pi/T in quasi-energy) is reported.
// Odd L is rejected.
PairingReport floquet_spectrum_pairing(const Eigen::MatrixXcd& unitary,
                                       double period);

// -- invariant battery ---------------------------------------------------

struct VerifyOptions {
  std::uint64_t seed = 20210901;
  // Test fixture: flips the sign of G_s inside the toggling closed form so
  // the toggling-sum check must fail.
  bool corrupt_gs_sign = false;
};

struct VerifyCheck {
  std::string name;
  double defect = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const;
  void print(std::ostream& out) const;
};

// Commutators, toggling sums vs closed form, rotation composition,
// Krylov-vs-dense trajectories, spectral pairing, cat-state invariance.
VerifyReport run_verification(const VerifyOptions& options = {});

}  // namespace spinkick
