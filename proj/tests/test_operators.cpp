#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>

#include "spinkick/lattice.hpp"
#include "spinkick/operators.hpp"
#include "spinkick/oracle.hpp"
#include "spinkick/rng.hpp"

using namespace spinkick;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

CouplingSet pair_set(double b, double c0 = 0.0, double c1 = 0.0) {
  CouplingSet cs;
  cs.count = 2;
  cs.b = {0.0, b, b, 0.0};
  cs.c = {c0, c1};
  cs.median_b = std::fabs(b);
  return cs;
}

CouplingSet random_set(int count, std::uint64_t seed, double sigma_factor = 10.0) {
  const SpinGraph g = generate_graph(count, 0.7, 0.8, seed);
  CouplingSet cs = compute_couplings(g);
  return sample_disorder(cs, cs.median_b, sigma_factor * cs.median_b,
                         derive_seed(seed, 4));
}

// independent Kronecker assembly used only by this test file
Eigen::MatrixXcd naive_kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::Matrix2cd spin_half(Axis axis) {
  Eigen::Matrix2cd m;
  switch (axis) {
    case Axis::X: m << 0, 0.5, 0.5, 0; break;
    case Axis::Y: m << 0, cd(0, -0.5), cd(0, 0.5), 0; break;
    case Axis::Z: m << 0.5, 0, 0, -0.5; break;
  }
  return m;
}

Eigen::MatrixXcd site_operator(int count, int site, Axis axis) {
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Ones(1, 1);
  for (int k = count - 1; k >= 0; --k)
    acc = naive_kron(acc, k == site ? spin_half(axis)
                                    : Eigen::Matrix2cd::Identity());
  return acc;
}

}  // namespace

TEST_CASE("system Hamiltonian expands a pair to the three printed terms") {
  const double b = 0.37;
  const TermOperator h = build_system_hamiltonian(pair_set(b));
  const TermOperator expected(
      2, {{2.0 * b, {{0, Axis::Z}, {1, Axis::Z}}},
          {-b, {{0, Axis::X}, {1, Axis::X}}},
          {-b, {{0, Axis::Y}, {1, Axis::Y}}}});
  CHECK(h == expected);
}

TEST_CASE("zero couplings leave a pure on-site Hamiltonian") {
  CouplingSet cs;
  cs.count = 3;
  cs.b.assign(9, 0.0);
  cs.c = {0.4, -0.2, 1.0};
  const TermOperator h = build_system_hamiltonian(cs);
  const TermOperator expected(3, {{0.4, {{0, Axis::Z}}},
                                  {-0.2, {{1, Axis::Z}}},
                                  {1.0, {{2, Axis::Z}}}});
  CHECK(h == expected);
}

TEST_CASE("dense assembly of a random instance matches explicit Kronecker sums") {
  const CouplingSet cs = random_set(5, 81);
  const TermOperator h = build_system_hamiltonian(cs);
  const Eigen::MatrixXcd dense = dense_assemble(h).matrix;

  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(32, 32);
  for (int j = 0; j < 5; ++j) {
    for (int k = j + 1; k < 5; ++k) {
      const double b = cs.coupling(j, k);
      expected += b * (3.0 * site_operator(5, j, Axis::Z) * site_operator(5, k, Axis::Z) -
                       site_operator(5, j, Axis::X) * site_operator(5, k, Axis::X) -
                       site_operator(5, j, Axis::Y) * site_operator(5, k, Axis::Y) -
                       site_operator(5, j, Axis::Z) * site_operator(5, k, Axis::Z));
    }
    expected += cs.c[j] * site_operator(5, j, Axis::Z);
  }
  CHECK((dense - expected).norm() < 1e-13);
}

TEST_CASE("emitted operators are Hermitian exactly in dense form") {
  const CouplingSet cs = random_set(4, 17);
  for (const TermOperator& op :
       {build_system_hamiltonian(cs), leading_effective_hamiltonian(cs),
        toggling_effective_hamiltonian(cs, 7, 1.1),
        replica_floquet_hamiltonian(cs, 0.05, kPi / 2)}) {
    const Eigen::MatrixXcd m = dense_assemble(op).matrix;
    CHECK((m - m.adjoint()).norm() == 0.0);
  }
}

TEST_CASE("leading effective Hamiltonian commutes with collective x and parity") {
  const CouplingSet cs = random_set(6, 23);
  const Eigen::MatrixXcd hbar =
      dense_assemble(leading_effective_hamiltonian(cs)).matrix;
  const Eigen::MatrixXcd ix = dense_assemble(collective_spin(6, Axis::X)).matrix;
  CHECK((hbar * ix - ix * hbar).norm() < 1e-12);
  const Eigen::MatrixXcd parity =
      dense_collective_rotation(6, {{0.0, 0.0, 1.0}, kPi}).matrix;
  CHECK((hbar * parity - parity * hbar).norm() < 1e-12);
}

TEST_CASE("two-spin leading Hamiltonian matches the hand-diagonalized block") {
  const double b = 1.9;
  const Eigen::MatrixXcd hbar =
      dense_assemble(leading_effective_hamiltonian(pair_set(b))).matrix;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hbar);
  // x-basis: triplet m=+-1 at -b/4, triplet m=0 at b/2, singlet at 0
  Eigen::Vector4d expected(-b / 4, -b / 4, 0.0, b / 2);
  std::sort(expected.data(), expected.data() + 4);
  for (int i = 0; i < 4; ++i)
    CHECK(es.eigenvalues()[i] == doctest::Approx(expected[i]).epsilon(1e-14));
}

TEST_CASE("lattice sum factors: closed form, trivial points, singular branch") {
  {
    const auto [gc, gs] = lattice_sum_factors(1, 0.3);
    CHECK(gc == doctest::Approx(std::cos(0.6)).epsilon(1e-15));
    CHECK(gs == doctest::Approx(std::sin(0.6)).epsilon(1e-15));
  }
  {
    const auto [gc, gs] = lattice_sum_factors(8, kPi / 2);
    CHECK(std::fabs(gc) < 1e-14);
    CHECK(std::fabs(gs) < 1e-14);
  }
  {
    const auto [gc, gs] = lattice_sum_factors(5, 0.3);
    double c = 0.0, s = 0.0;
    for (int n = 1; n <= 5; ++n) {
      c += std::cos(0.6 * n) / 5.0;
      s += std::sin(0.6 * n) / 5.0;
    }
    CHECK(gc == doctest::Approx(c).epsilon(1e-14));
    CHECK(gs == doctest::Approx(s).epsilon(1e-14));
  }
  Rng rng(99);
  for (int draw = 0; draw < 100; ++draw) {
    const long n = 1 + static_cast<long>(rng.uniform() * 40);
    const double theta = rng.uniform(1e-3, 2 * kPi - 1e-3);
    const auto [gc, gs] = lattice_sum_factors(n, theta);
    double c = 0.0, s = 0.0;
    for (long k = 1; k <= n; ++k) {
      c += std::cos(2.0 * k * theta) / static_cast<double>(n);
      s += std::sin(2.0 * k * theta) / static_cast<double>(n);
    }
    CHECK(std::fabs(gc - c) < 1e-12);
    CHECK(std::fabs(gs - s) < 1e-12);
  }
  // |sin theta| < 1e-9 goes through direct summation
  const auto [gc_pi, gs_pi] = lattice_sum_factors(4, kPi);
  CHECK(gc_pi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(gs_pi) < 1e-12);
}

TEST_CASE("toggling form approaches the leading Hamiltonian at large N") {
  const CouplingSet cs = random_set(4, 11);
  const TermOperator toggled = toggling_effective_hamiltonian(cs, 10000, kPi / 2);
  const TermOperator leading = leading_effective_hamiltonian(cs);
  double max_c = 0.0;
  for (double c : cs.c) max_c = std::max(max_c, std::fabs(c));
  // dipolar coefficients within 1e-3, on-site part suppressed below 1e-3*max|c|
  CHECK(max_coefficient_difference(toggled, leading) < 1e-3 * std::max(1.0, max_c));
}

TEST_CASE("toggling closed form equals the dense conjugation average") {
  const CouplingSet cs = random_set(4, 29);
  const TermOperator h = build_system_hamiltonian(cs);
  {
    const Eigen::MatrixXcd closed =
        dense_assemble(toggling_effective_hamiltonian(cs, 7, 1.1)).matrix;
    const Eigen::MatrixXcd brute = toggling_sum(h, 7, 1.1).matrix;
    CHECK((closed - brute).norm() < 1e-12);
  }
  {
    // theta = pi exercises the singular-branch evaluation; for even N the
    // average is (H + X_pi H X_pi^-1)/2
    const Eigen::MatrixXcd closed =
        dense_assemble(toggling_effective_hamiltonian(cs, 6, kPi)).matrix;
    const Eigen::MatrixXcd brute = toggling_sum(h, 6, kPi).matrix;
    CHECK((closed - brute).norm() < 1e-12);

    const Eigen::MatrixXcd hd = dense_assemble(h).matrix;
    const Eigen::MatrixXcd xpi =
        dense_collective_rotation(4, {{1.0, 0.0, 0.0}, kPi}).matrix;
    const Eigen::MatrixXcd half = 0.5 * (hd + xpi * hd * xpi.adjoint());
    CHECK((closed - half).norm() < 1e-12);
  }
}

TEST_CASE("replica Hamiltonian reduces to the kicked free spin") {
  CouplingSet cs;
  cs.count = 3;
  cs.b.assign(9, 0.0);
  cs.c.assign(3, 0.0);
  const double tau = 0.2;
  const TermOperator h = replica_floquet_hamiltonian(cs, tau, kPi / 2);
  const TermOperator expected =
      (kPi / 2 / (kPi / 2 + tau)) * collective_spin(3, Axis::X);
  CHECK(max_coefficient_difference(h, expected) < 1e-15);
}

TEST_CASE("replica Hamiltonian reproduces one fast period to O(tau^2)") {
  const CouplingSet cs = random_set(2, 37);
  auto defect = [&](double tau) {
    const TermOperator hf = replica_floquet_hamiltonian(cs, tau, kPi / 2);
    const Eigen::MatrixXcd lhs =
        dense_propagator(dense_assemble(hf), kPi / 2 + tau).matrix;
    const Eigen::MatrixXcd ux =
        dense_collective_rotation(2, {{1.0, 0.0, 0.0}, kPi / 2}).matrix;
    const Eigen::MatrixXcd uh =
        dense_propagator(dense_assemble(build_system_hamiltonian(cs)), tau).matrix;
    return (lhs - ux * uh).norm();
  };
  const double e1 = defect(0.02);
  const double e2 = defect(0.01);
  const double e4 = defect(0.005);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
  CHECK(e2 / e4 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("replica Hamiltonian approaches the collective x spin as tau -> 0") {
  const CouplingSet cs = random_set(2, 41);
  const TermOperator ix = collective_spin(2, Axis::X);
  double prev = -1.0;
  for (double tau : {0.2, 0.1, 0.05, 0.025}) {
    const double diff = max_coefficient_difference(
        replica_floquet_hamiltonian(cs, tau, kPi / 2), ix);
    if (prev > 0.0) CHECK(diff < 0.6 * prev);  // linear in tau
    prev = diff;
  }
}

TEST_CASE("replica form rejects other kick angles") {
  const CouplingSet cs = random_set(2, 43);
  CHECK_THROWS_WITH_AS(replica_floquet_hamiltonian(cs, 0.1, 1.0),
                       "replica form available only at theta=pi/2",
                       std::invalid_argument);
}

TEST_CASE("composite rotation reproduces the three quoted limits") {
  {
    const RotationSpec rot = composite_rotation(8, kPi / 2, 0.8);
    CHECK(rot.angle == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(rot.axis[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rot.axis[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rot.axis[2] == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    const RotationSpec rot = composite_rotation(9, kPi / 2, 1e-9);
    CHECK(rot.angle == doctest::Approx(kPi / 2).epsilon(1e-8));
    CHECK(rot.axis[0] == doctest::Approx(1.0).epsilon(1e-8));
  }
  {
    const RotationSpec rot = composite_rotation(9, kPi / 2, kPi);
    CHECK(rot.angle == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(rot.axis[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rot.axis[1] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(rot.axis[2] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("composite rotation equals the SU(2) product up to global phase") {
  Rng rng(4321);
  for (int draw = 0; draw < 50; ++draw) {
    const long pulses = 1 + static_cast<long>(rng.uniform() * 20);
    const double theta = rng.uniform(0.0, 2 * kPi);
    const double gamma = rng.uniform(0.0, 2 * kPi);
    const RotationSpec rot = composite_rotation(pulses, theta, gamma);
    Eigen::Matrix2cd product = Eigen::Matrix2cd::Identity();
    const Eigen::Matrix2cd ux = dense_single_spin_rotation({{1, 0, 0}, theta});
    for (long n = 0; n < pulses; ++n) product = ux * product;
    product = product * dense_single_spin_rotation({{0, 0, 1}, gamma});
    const Eigen::Matrix2cd composed = dense_single_spin_rotation(rot);
    const cd overlap = (product.adjoint() * composed).trace();
    const cd phase = overlap / std::abs(overlap);
    CHECK((composed - phase * product).norm() < 1e-12);
  }
}

TEST_CASE("boundary phase vanishes for even kick counts and even l") {
  for (long pulses : {3, 7, 301})
    for (long m : {2, 4, 10}) CHECK(boundary_phase(m, 1, pulses) == 0.0);
  for (long l : {0, 2, 4})
    for (long m : {1, 2, 3}) CHECK(boundary_phase(m, l, 17) == 0.0);
}

TEST_CASE("boundary phase matches the accumulated single-spin rotation") {
  const double d = boundary_phase(1, 1, 301);
  CHECK(d == doctest::Approx(-5.0 * kPi / 2).epsilon(1e-13));

  // single spin: (X^N Z_pi)^M must equal Z_pi^M e^{-i d Ix} up to global phase
  const Eigen::Matrix2cd x =
      dense_single_spin_rotation({{1, 0, 0}, kPi / 2});
  const Eigen::Matrix2cd z = dense_single_spin_rotation({{0, 0, 1}, kPi});
  Eigen::Matrix2cd lhs = Eigen::Matrix2cd::Identity();
  for (int n = 0; n < 301; ++n) lhs = x * lhs;
  lhs = lhs * z;
  Eigen::Matrix2cd rhs = z * dense_single_spin_rotation({{1, 0, 0}, d});
  const cd overlap = (rhs.adjoint() * lhs).trace();
  const cd phase = overlap / std::abs(overlap);
  CHECK((lhs - phase * rhs).norm() < 1e-12);
}

TEST_CASE("small-N two-cycle Hamiltonian") {
  SUBCASE("reduces to the leading Hamiltonian without disorder") {
    CouplingSet cs = random_set(4, 53);
    cs.c.assign(cs.count, 0.0);
    CHECK(small_n_two_cycle_hamiltonian(cs) == leading_effective_hamiltonian(cs));
  }
  SUBCASE("single-particle correction breaks x conservation") {
    const CouplingSet cs = random_set(4, 59);
    const Eigen::MatrixXcd h =
        dense_assemble(small_n_two_cycle_hamiltonian(cs)).matrix;
    const Eigen::MatrixXcd ix = dense_assemble(collective_spin(4, Axis::X)).matrix;
    CHECK((h * ix - ix * h).norm() > 1e-6);
  }
  SUBCASE("equals the dense two-cycle toggling average") {
    const CouplingSet cs = random_set(4, 61);
    const Eigen::MatrixXcd closed =
        dense_assemble(small_n_two_cycle_hamiltonian(cs)).matrix;

    const Eigen::MatrixXcd h0 =
        dense_assemble(toggling_effective_hamiltonian(cs, 9, kPi / 2)).matrix;
    const RotationSpec un = composite_rotation(9, kPi / 2, kPi);
    const Eigen::MatrixXcd u = dense_collective_rotation(4, un).matrix;
    const Eigen::MatrixXcd h1 = u.adjoint() * h0 * u;
    const Eigen::MatrixXcd h2 = u.adjoint() * h1 * u;
    CHECK((closed - 0.5 * (h1 + h2)).norm() < 1e-12);
  }
  SUBCASE("other parameters are rejected") {
    const CouplingSet cs = random_set(4, 67);
    CHECK_THROWS_WITH_AS(small_n_two_cycle_hamiltonian(cs, 8),
                         "closed form not derived in paper; use toggling oracle",
                         std::invalid_argument);
  }
}

TEST_CASE("operator text serialization round-trips exactly") {
  const CouplingSet cs = random_set(5, 71);
  const TermOperator h = toggling_effective_hamiltonian(cs, 7, 0.9);
  const TermOperator back = TermOperator::from_text(h.to_text());
  CHECK(back == h);
}
