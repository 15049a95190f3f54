#include "spinkick/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "spinkick/lattice.hpp"
#include "spinkick/rng.hpp"

namespace spinkick {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::Matrix2cd pauli_half(Axis axis) {
  Eigen::Matrix2cd m;
  const cplx i(0.0, 1.0);
  switch (axis) {
    case Axis::X:
      m << 0.0, 0.5, 0.5, 0.0;
      break;
    case Axis::Y:
      m << 0.0, -0.5 * i, 0.5 * i, 0.0;
      break;
    case Axis::Z:
      m << 0.5, 0.0, 0.0, -0.5;
      break;
  }
  return m;
}

void require_dense_size(int site_count, int cap, const char* who) {
  if (site_count > cap) {
    std::ostringstream msg;
    msg << who << ": dense path capped at " << cap << " sites, got "
        << site_count;
    throw std::invalid_argument(msg.str());
  }
}

double wrap_phase(double phi) {
  while (phi <= -kPi) phi += 2 * kPi;
  while (phi > kPi) phi -= 2 * kPi;
  return phi;
}

}  // namespace

DenseOperator dense_assemble(const TermOperator& op) {
  require_dense_size(op.site_count(), kDenseMaxSites, "dense_assemble");
  const int count = op.site_count();
  const Eigen::Index dim = Eigen::Index{1} << count;
  Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(dim, dim);
  const Eigen::Matrix2cd eye = Eigen::Matrix2cd::Identity();

  for (const auto& term : op.terms()) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Ones(1, 1);
    // site L-1 is the most significant index bit
    for (int site = count - 1; site >= 0; --site) {
      const auto it =
          std::find_if(term.factors.begin(), term.factors.end(),
                       [site](const PauliFactor& f) { return f.site == site; });
      acc = kron(acc, it == term.factors.end() ? eye : pauli_half(it->axis));
    }
    total += term.coeff * acc;
  }
  return {count, std::move(total)};
}

DenseOperator dense_propagator(const DenseOperator& h, double duration) {
  const double herm_defect = (h.matrix - h.matrix.adjoint()).norm();
  if (herm_defect > 1e-10 * std::max(1.0, h.matrix.norm()))
    throw std::invalid_argument("dense_propagator: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.matrix);
  const Eigen::VectorXd& lam = es.eigenvalues();
  Eigen::VectorXcd phases(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    phases[i] = std::exp(cplx(0.0, -duration * lam[i]));
  DenseOperator out;
  out.site_count = h.site_count;
  out.matrix = es.eigenvectors() * phases.asDiagonal() *
               es.eigenvectors().adjoint();
  return out;
}

Eigen::Matrix2cd dense_single_spin_rotation(const RotationSpec& rot) {
  const double c = std::cos(rot.angle / 2);
  const double s = std::sin(rot.angle / 2);
  Eigen::Matrix2cd u;
  u << cplx(c, -s * rot.axis[2]), cplx(-s * rot.axis[1], -s * rot.axis[0]),
      cplx(s * rot.axis[1], -s * rot.axis[0]), cplx(c, s * rot.axis[2]);
  return u;
}

DenseOperator dense_collective_rotation(int site_count, const RotationSpec& rot) {
  require_dense_size(site_count, kDenseMaxSites, "dense_collective_rotation");
  const Eigen::Matrix2cd u = dense_single_spin_rotation(rot);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Ones(1, 1);
  for (int site = 0; site < site_count; ++site) acc = kron(acc, u);
  return {site_count, std::move(acc)};
}

Eigen::VectorXcd dense_state(const StateVector& state) {
  return Eigen::Map<const Eigen::VectorXcd>(state.amplitudes.data(),
                                            state.amplitudes.size());
}

DenseOperator toggling_sum(const TermOperator& h, long pulses, double theta) {
  require_dense_size(h.site_count(), 8, "toggling_sum");
  if (pulses < 1) throw std::invalid_argument("toggling_sum: need N >= 1");
  const DenseOperator dense_h = dense_assemble(h);
  const DenseOperator ux =
      dense_collective_rotation(h.site_count(), {{1.0, 0.0, 0.0}, theta});

  Eigen::MatrixXcd conjugated = dense_h.matrix;
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(conjugated.rows(), conjugated.cols());
  for (long n = 1; n <= pulses; ++n) {
    conjugated = ux.matrix * conjugated * ux.matrix.adjoint();
    sum += conjugated;
  }
  sum /= static_cast<double>(pulses);
  return {h.site_count(), std::move(sum)};
}

std::string PairingReport::format() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max pairing defect %.3e over %zu magnetization-carrying "
                "eigenstates (%.3e over all %zu)",
                max_defect, paired_states, unrestricted_defect,
                eigenphases.size());
  return buf;
}

namespace {

double worst_partner_defect(const std::vector<double>& phases) {
  double worst = 0.0;
  for (double phase : phases) {
    double best = 2 * kPi;
    for (double partner : phases)
      best = std::min(best, std::fabs(wrap_phase(phase + kPi - partner)));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

PairingReport floquet_spectrum_pairing(const Eigen::MatrixXcd& unitary,
                                       double period) {
  if (period <= 0.0)
    throw std::invalid_argument("floquet_spectrum_pairing: period must be > 0");
  const Eigen::Index dim = unitary.rows();
  if (dim != unitary.cols() || dim < 2 || (dim & (dim - 1)) != 0)
    throw std::invalid_argument("floquet_spectrum_pairing: bad unitary size");
  int count = 0;
  for (Eigen::Index d = dim; d > 1; d >>= 1) ++count;
  if (count % 2 != 0)
    throw std::invalid_argument(
        "floquet_spectrum_pairing: odd site count rejected (parity squares to "
        "-1, pairing statement needs restating)");

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(unitary);
  // Eigenstates in the zero-x-magnetization sector are parity eigenstates
  // without a degenerate partner; the exact pi/T pairing concerns the
  // magnetization-carrying sectors, where each state is one of the two
  // parity combinations of a +/-m doublet.
  const Eigen::MatrixXcd ix =
      dense_assemble(collective_spin(count, Axis::X)).matrix;
  const Eigen::MatrixXcd ix_sq = ix * ix;

  PairingReport report;
  report.eigenphases.resize(dim);
  std::vector<double> carrying;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double phase = std::arg(es.eigenvalues()[i]);
    report.eigenphases[i] = phase;
    const Eigen::VectorXcd vec = es.eigenvectors().col(i);
    const double weight = vec.dot(ix_sq * vec).real();
    if (weight > 0.5) carrying.push_back(phase);
  }
  std::sort(report.eigenphases.begin(), report.eigenphases.end());
  std::sort(carrying.begin(), carrying.end());

  report.paired_states = carrying.size();
  report.unrestricted_defect = worst_partner_defect(report.eigenphases);
  report.max_defect =
      carrying.empty() ? report.unrestricted_defect : worst_partner_defect(carrying);
  return report;
}

// -- invariant battery ----------------------------------------------------

namespace {

CouplingSet verification_couplings(int count, std::uint64_t seed) {
  const SpinGraph graph = generate_graph(count, 0.7, 0.8, seed);
  CouplingSet cs = compute_couplings(graph);
  return sample_disorder(cs, cs.median_b, 10.0 * cs.median_b,
                         derive_seed(seed, 11));
}

double unitary_difference_up_to_phase(const Eigen::MatrixXcd& a,
                                      const Eigen::MatrixXcd& b) {
  const cplx overlap = (b.adjoint() * a).trace();
  if (std::abs(overlap) == 0.0) return (a - b).norm();
  const cplx phase = overlap / std::abs(overlap);
  return (a - phase * b).norm();
}

}  // namespace

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const VerifyCheck& c) { return c.pass; });
}

void VerifyReport::print(std::ostream& out) const {
  for (const auto& c : checks) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s  %-28s defect=%.3e  tol=%.1e\n",
                  c.pass ? "PASS" : "FAIL", c.name.c_str(), c.defect,
                  c.tolerance);
    out << buf;
  }
}

VerifyReport run_verification(const VerifyOptions& options) {
  VerifyReport report;
  auto add = [&report](const std::string& name, double defect, double tol) {
    report.checks.push_back({name, defect, tol, defect < tol});
  };
  Rng rng(derive_seed(options.seed, 3));

  // [Hbar, Ix] = 0 and [Hbar, e^{-i pi Iz}] = 0, dense at L = 6
  {
    const CouplingSet cs = verification_couplings(6, options.seed);
    const Eigen::MatrixXcd hbar =
        dense_assemble(leading_effective_hamiltonian(cs)).matrix;
    const Eigen::MatrixXcd ix = dense_assemble(collective_spin(6, Axis::X)).matrix;
    add("commutator_collective_x", (hbar * ix - ix * hbar).norm(), 1e-12);

    const Eigen::MatrixXcd parity =
        dense_collective_rotation(6, {{0.0, 0.0, 1.0}, kPi}).matrix;
    add("commutator_parity", (hbar * parity - parity * hbar).norm(), 1e-12);
  }

  // toggling closed form vs brute-force conjugation sum, 20 random draws
  {
    const CouplingSet cs = verification_couplings(4, options.seed + 1);
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
      const long pulses = 1 + static_cast<long>(rng.uniform() * 12.0);
      const double theta = rng.uniform(0.05, 2 * kPi - 0.05);
      const double closed_theta = options.corrupt_gs_sign ? -theta : theta;
      const Eigen::MatrixXcd closed =
          dense_assemble(
              toggling_effective_hamiltonian(cs, pulses, closed_theta))
              .matrix;
      const Eigen::MatrixXcd brute =
          toggling_sum(build_system_hamiltonian(cs), pulses, theta).matrix;
      worst = std::max(worst, (closed - brute).norm());
    }
    add("toggling_closed_form", worst, 1e-12);
  }

  // composite rotation vs SU(2) product, 50 draws + the three quoted limits
  {
    double worst = 0.0;
    auto check_one = [&](long pulses, double theta, double gamma) {
      const RotationSpec rot =
          composite_rotation(pulses, theta, gamma, {0.0, 0.0, 1.0});
      const Eigen::Matrix2cd composed = dense_single_spin_rotation(rot);
      Eigen::Matrix2cd product = Eigen::Matrix2cd::Identity();
      const Eigen::Matrix2cd ux =
          dense_single_spin_rotation({{1.0, 0.0, 0.0}, theta});
      for (long n = 0; n < pulses; ++n) product = ux * product;
      product = product * dense_single_spin_rotation({{0.0, 0.0, 1.0}, gamma});
      worst = std::max(worst, unitary_difference_up_to_phase(composed, product));
    };
    for (int draw = 0; draw < 50; ++draw)
      check_one(1 + static_cast<long>(rng.uniform() * 20.0),
                rng.uniform(0.0, 2 * kPi), rng.uniform(0.0, 2 * kPi));
    check_one(8, kPi / 2, 0.7);
    check_one(9, kPi / 2, 1e-9);
    check_one(9, kPi / 2, kPi - 1e-9);
    add("rotation_composition", worst, 1e-12);
  }

  // Krylov trajectory vs dense propagation, L = 6, one protocol cycle mix
  {
    const CouplingSet cs = verification_couplings(6, options.seed + 2);
    const TermOperator h = build_system_hamiltonian(cs);
    const CompiledOperator kernel(h);
    const DenseOperator dense_h = dense_assemble(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_h.matrix);

    StateVector psi = polarized_state(6, Axis::X, +1);
    Eigen::VectorXcd ref = dense_state(psi);
    const RotationSpec fast{{1.0, 0.0, 0.0}, kPi / 2};
    const Eigen::MatrixXcd fast_dense =
        dense_collective_rotation(6, fast).matrix;
    const double tau = 0.05 / std::max(cs.median_b, 1e-12);
    EvolveOptions opt;
    opt.tol = 1e-12;
    double worst = 0.0;
    for (int step = 0; step < 60; ++step) {
      apply_collective_rotation(psi, fast);
      evolve_step(psi, kernel, tau, opt);
      Eigen::VectorXcd phases(es.eigenvalues().size());
      for (Eigen::Index i = 0; i < phases.size(); ++i)
        phases[i] = std::exp(cplx(0.0, -tau * es.eigenvalues()[i]));
      ref = fast_dense * ref;
      ref = es.eigenvectors() * (phases.asDiagonal() *
                                 (es.eigenvectors().adjoint() * ref));
      worst = std::max(worst, (dense_state(psi) - ref).norm());
    }
    add("krylov_vs_dense", worst, 1e-9);
  }

  // quasi-energy pairing and cat-state invariance of the idealized PDTC
  // unitary at even L
  {
    double worst_pairing = 0.0;
    double worst_cat = 0.0;
    for (int count : {2, 4, 6}) {
      const CouplingSet cs = verification_couplings(count, options.seed + count);
      const TermOperator hbar = leading_effective_hamiltonian(cs);
      const double period = 1.0 / std::max(cs.median_b, 1e-12);
      const Eigen::MatrixXcd u0 =
          dense_propagator(dense_assemble(hbar), period).matrix;
      const Eigen::MatrixXcd parity =
          dense_collective_rotation(count, {{0.0, 0.0, 1.0}, kPi}).matrix;
      const Eigen::MatrixXcd floquet = u0 * parity;
      worst_pairing = std::max(
          worst_pairing, floquet_spectrum_pairing(floquet, period).max_defect);
      for (int sign : {+1, -1}) {
        const Eigen::VectorXcd cat = dense_state(cat_state(count, sign));
        const double fidelity = std::abs(cat.dot(floquet * cat));
        worst_cat = std::max(worst_cat, std::fabs(fidelity - 1.0));
      }
    }
    add("spectral_pairing", worst_pairing, 1e-8);
    add("cat_state_invariance", worst_cat, 1e-10);
  }

  return report;
}

}  // namespace spinkick
