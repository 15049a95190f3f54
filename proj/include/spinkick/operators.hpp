#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "spinkick/lattice.hpp"

namespace spinkick {

enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

char axis_letter(Axis axis);

struct PauliFactor {
  int site = 0;
  Axis axis = Axis::X;
  friend bool operator==(const PauliFactor&, const PauliFactor&) = default;
};

// One weighted Pauli product: coeff * prod_i I_{site_i, axis_i}. Spin-1/2
// operators I = sigma/2; real coefficients keep every term Hermitian.
struct PauliTerm {
  double coeff = 0.0;
  std::vector<PauliFactor> factors;  // sites strictly ascending
  friend bool operator==(const PauliTerm&, const PauliTerm&) = default;
};

// Weighted sum of few-body Pauli products; the universal Hamiltonian
// representation used by both the matrix-free engine and the dense oracle.
// Terms are kept in a canonical order (factor lists sorted, terms sorted,
// equal structures merged, coefficients below 1e-15 dropped) so equality is
// structural.
class TermOperator {
 public:
  TermOperator() = default;
  TermOperator(int site_count, std::vector<PauliTerm> terms);

  int site_count() const { return site_count_; }
  const std::vector<PauliTerm>& terms() const { return terms_; }

  friend bool operator==(const TermOperator&, const TermOperator&) = default;
  friend TermOperator operator+(const TermOperator& a, const TermOperator& b);
  friend TermOperator operator*(double scale, const TermOperator& op);

  // "coeff site:axis site:axis ..." per line, canonical order; exact
  // round-trip.
  std::string to_text() const;
  static TermOperator from_text(const std::string& text);

 private:
  int site_count_ = 0;
  std::vector<PauliTerm> terms_;
};

// Largest absolute coefficient difference between the canonical forms of two
// operators (missing terms count with their full coefficient).
double max_coefficient_difference(const TermOperator& a, const TermOperator& b);

// Sum_j I_{j,axis}
TermOperator collective_spin(int site_count, Axis axis);

// H = sum_{j<k} b_jk (3 I_jz I_kz - vec I_j . vec I_k) + sum_j c_j I_jz,
// expanded as (2 I_z I_z - I_x I_x - I_y I_y) per pair.
TermOperator build_system_hamiltonian(const CouplingSet& couplings);

// Hbar = sum_{j<k} b_jk (3/2 (I_jz I_kz + I_jy I_ky) - vec I_j . vec I_k);
// commutes with the collective x spin and with exp(-i pi I_z^tot).
TermOperator leading_effective_hamiltonian(const CouplingSet& couplings);

// G_c(N,theta) = (1/N) sin(N theta)/sin(theta) cos((N+1) theta) and the sine
// analogue; evaluated by direct summation of (1/N) sum_n cos/sin(2 n theta)
// when |sin(theta)| < 1e-9.
std::pair<double, double> lattice_sum_factors(long pulses, double theta);

// Leading toggling-frame average (1/N) sum_n U_x^n H U_x^-n in closed form:
// dipolar part with G_{c,s}(N,theta) on the double-quantum and mixed
// flip-flop parts, on-site part with G_{c,s}(N,theta/2) on I_z and I_y.
TermOperator toggling_effective_hamiltonian(const CouplingSet& couplings,
                                            long pulses, double theta);

// First-order Floquet generator of one fast period U_x U_H at theta = pi/2:
// [pi/2 Ix^tot + tau Hbar - tau (3 pi/4 sum b_jk (IzIy+IyIz) + pi/4 sum c_j
// (I_jy - I_jz))] / (pi/2 + tau). Other kick angles are rejected
// ("replica form available only at theta=pi/2").
TermOperator replica_floquet_hamiltonian(const CouplingSet& couplings,
                                         double tau, double theta);

struct RotationSpec {
  std::array<double, 3> axis{0.0, 0.0, 1.0};  // unit vector
  double angle = 0.0;                         // radians, [0, 2 pi)
};

// The single collective rotation equal to U_x^N U_z(gamma about slow_axis),
// computed by exact SU(2) composition; angle wrapped to [0, 2 pi), identity
// reported about (0,0,1).
RotationSpec composite_rotation(long pulses, double theta, double gamma,
                                std::array<double, 3> slow_axis = {0.0, 0.0,
                                                                   1.0});

// d_N(M,l): x-spin boundary phase of [U_F]^M at gamma = l pi, theta = pi/2;
// zero for even l (full kicks are inactive, the printed formula is 0/0).
double boundary_phase(long kicks, long l, long pulses);

// Two-cycle effective Hamiltonian at N=9, theta=pi/2, gamma=pi:
// Hbar + 1/(2N) sum_j c_j (I_jz - I_jy). Other parameters are rejected
// ("closed form not derived in paper; use toggling oracle").
TermOperator small_n_two_cycle_hamiltonian(
    const CouplingSet& couplings, long pulses = 9,
    double theta = std::numbers::pi / 2, double gamma = std::numbers::pi);

}  // namespace spinkick
