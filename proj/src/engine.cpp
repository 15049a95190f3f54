#include "spinkick/engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "spinkick/rng.hpp"
#include "spinkick/version.hpp"

namespace spinkick {

namespace {

constexpr double kNormDriftTol = 1e-10;

inline int parity64(std::uint64_t x) {
#if defined(__GNUC__)
  return __builtin_parityll(x);
#else
  return std::popcount(x) & 1;
#endif
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double StateVector::norm() const {
  double s = 0.0;
  for (const cplx& a : amplitudes) s += std::norm(a);
  return std::sqrt(s);
}

StateVector polarized_state(int site_count, Axis axis, int sign) {
  if (site_count < 1)
    throw std::invalid_argument("polarized_state: site count must be >= 1");
  const std::size_t dim = std::size_t{1} << site_count;
  StateVector psi{site_count, std::vector<cplx>(dim, cplx(0.0, 0.0))};
  const double amp = std::pow(2.0, -0.5 * site_count);
  switch (axis) {
    case Axis::Z:
      psi.amplitudes[sign >= 0 ? 0 : dim - 1] = 1.0;
      break;
    case Axis::X:
      for (std::size_t s = 0; s < dim; ++s) {
        const int p = std::popcount(s);
        psi.amplitudes[s] = (sign >= 0 || p % 2 == 0) ? amp : -amp;
      }
      break;
    case Axis::Y: {
      const cplx unit = (sign >= 0) ? cplx(0.0, 1.0) : cplx(0.0, -1.0);
      for (std::size_t s = 0; s < dim; ++s) {
        cplx v = amp;
        for (int p = std::popcount(s); p > 0; --p) v *= unit;
        psi.amplitudes[s] = v;
      }
      break;
    }
  }
  return psi;
}

StateVector cat_state(int site_count, int sign) {
  const std::size_t dim = std::size_t{1} << site_count;
  StateVector psi{site_count, std::vector<cplx>(dim, cplx(0.0, 0.0))};
  const double amp = std::numbers::sqrt2 * std::pow(2.0, -0.5 * site_count);
  const int want = (sign >= 0) ? 0 : 1;
  for (std::size_t s = 0; s < dim; ++s) {
    if (std::popcount(s) % 2 == want) psi.amplitudes[s] = amp;
  }
  return psi;
}

namespace {

// local action of one Pauli half on a bit value: returns (flips, phase)
struct LocalAxis {
  bool flips = false;
  cplx phase_bit0{0.5, 0.0};  // factor when the source bit is 0
  cplx phase_bit1{0.5, 0.0};
};

LocalAxis local_axis(Axis axis) {
  switch (axis) {
    case Axis::X: return {true, {0.5, 0.0}, {0.5, 0.0}};
    case Axis::Y: return {true, {0.0, 0.5}, {0.0, -0.5}};
    case Axis::Z: return {false, {0.5, 0.0}, {-0.5, 0.0}};
  }
  return {};
}

}  // namespace

CompiledOperator::CompiledOperator(const TermOperator& op)
    : site_count_(op.site_count()) {
  const std::size_t dim = dimension();
  bool any_diag = false;

  // keyed by (low_bit, high_bit); high == low for single-site programs
  auto find_program = [](std::vector<PairProgram>& list, int low,
                         int high) -> PairProgram& {
    for (auto& program : list)
      if (program.low_bit == low && program.high_bit == high) return program;
    list.push_back({low, high, {}});
    return list.back();
  };

  for (const auto& term : op.terms()) {
    std::uint64_t xm = 0, ym = 0, zm = 0;
    for (const auto& f : term.factors) {
      const std::uint64_t bit = std::uint64_t{1} << f.site;
      switch (f.axis) {
        case Axis::X: xm |= bit; break;
        case Axis::Y: ym |= bit; break;
        case Axis::Z: zm |= bit; break;
      }
    }
    if (xm == 0 && ym == 0) {
      // pure-z string: one shared diagonal
      const double weight =
          term.coeff * std::pow(0.5, static_cast<double>(term.factors.size()));
      if (!any_diag) {
        diagonal_.assign(dim, 0.0);
        any_diag = true;
      }
      for (std::size_t s = 0; s < dim; ++s)
        diagonal_[s] += parity64(s & zm) ? -weight : weight;
      continue;
    }

    if (term.factors.size() <= 2) {
      // in-cell sparse entries over the term's sites
      const int low = term.factors.front().site;
      const int high = term.factors.back().site;
      PairProgram& program = (term.factors.size() == 1)
                                 ? find_program(singles_, low, low)
                                 : find_program(pairs_, low, high);
      const int width = static_cast<int>(term.factors.size());
      for (int src = 0; src < (1 << width); ++src) {
        int dst = 0;
        cplx coeff(term.coeff, 0.0);
        for (int f = 0; f < width; ++f) {
          const LocalAxis act = local_axis(term.factors[f].axis);
          const int bit = (src >> f) & 1;
          coeff *= bit ? act.phase_bit1 : act.phase_bit0;
          dst |= ((bit ^ (act.flips ? 1 : 0)) << f);
        }
        if (coeff == cplx(0.0, 0.0)) continue;
        PairProgram& target = program;
        target.entries.push_back({static_cast<std::uint8_t>(dst),
                                  static_cast<std::uint8_t>(src), coeff});
      }
      continue;
    }

    // higher-weight Pauli string: bit-mask pass with
    // phase(s) = i^{|Y|} (-1)^{popcount(s & (zm|ym))}
    cplx pref(term.coeff *
                  std::pow(0.5, static_cast<double>(term.factors.size())),
              0.0);
    switch (std::popcount(ym) % 4) {
      case 1: pref *= cplx(0.0, 1.0); break;
      case 2: pref *= -1.0; break;
      case 3: pref *= cplx(0.0, -1.0); break;
      default: break;
    }
    generic_.push_back({xm | ym, zm | ym, pref});
  }

  // merge duplicate (dst, src) cell entries
  for (auto* list : {&singles_, &pairs_}) {
    for (auto& program : *list) {
      std::vector<CellEntry> merged;
      for (const auto& entry : program.entries) {
        bool found = false;
        for (auto& m : merged) {
          if (m.dst == entry.dst && m.src == entry.src) {
            m.coeff += entry.coeff;
            found = true;
          }
        }
        if (!found) merged.push_back(entry);
      }
      merged.erase(std::remove_if(merged.begin(), merged.end(),
                                  [](const CellEntry& e) {
                                    return std::abs(e.coeff) < 1e-300;
                                  }),
                   merged.end());
      program.entries = std::move(merged);
    }
  }
}

void CompiledOperator::apply(std::span<const cplx> in, std::span<cplx> out) const {
  const std::size_t dim = dimension();
  if (diagonal_.empty()) {
    std::fill(out.begin(), out.end(), cplx(0.0, 0.0));
  } else {
    for (std::size_t s = 0; s < dim; ++s) out[s] = diagonal_[s] * in[s];
  }

  // each cell entry is applied as a contiguous AXPY over the low-bit segment
  for (const auto& program : singles_) {
    const std::size_t bit = std::size_t{1} << program.low_bit;
    for (std::size_t hi = 0; hi < dim; hi += 2 * bit) {
      for (const auto& entry : program.entries) {
        const cplx c = entry.coeff;
        cplx* dst = out.data() + hi + (entry.dst ? bit : 0);
        const cplx* src = in.data() + hi + (entry.src ? bit : 0);
        for (std::size_t lo = 0; lo < bit; ++lo) dst[lo] += c * src[lo];
      }
    }
  }

  for (const auto& program : pairs_) {
    const std::size_t bl = std::size_t{1} << program.low_bit;
    const std::size_t bh = std::size_t{1} << program.high_bit;
    const std::size_t offset[4] = {0, bl, bh, bl + bh};
    for (std::size_t hi = 0; hi < dim; hi += 2 * bh) {
      for (std::size_t mid = 0; mid < bh; mid += 2 * bl) {
        const std::size_t base = hi + mid;
        for (const auto& entry : program.entries) {
          const cplx c = entry.coeff;
          cplx* dst = out.data() + base + offset[entry.dst];
          const cplx* src = in.data() + base + offset[entry.src];
          for (std::size_t lo = 0; lo < bl; ++lo) dst[lo] += c * src[lo];
        }
      }
    }
  }

  for (const auto& term : generic_) {
    const std::uint64_t flip = term.flip_mask;
    for (std::size_t s = 0; s < dim; ++s) {
      const cplx v = parity64(s & term.sign_mask) ? -term.prefactor : term.prefactor;
      out[s ^ flip] += v * in[s];
    }
  }
}

void apply_collective_rotation(StateVector& state, const RotationSpec& rot) {
  if (rot.angle == 0.0) return;
  const double c = std::cos(rot.angle / 2);
  const double s = std::sin(rot.angle / 2);
  const auto& n = rot.axis;
  // e^{-i angle n.sigma/2}
  const cplx u00(c, -s * n[2]);
  const cplx u01(-s * n[1], -s * n[0]);
  const cplx u10(s * n[1], -s * n[0]);
  const cplx u11(c, s * n[2]);

  auto& a = state.amplitudes;
  const std::size_t dim = a.size();
  for (int j = 0; j < state.site_count; ++j) {
    const std::size_t low = std::size_t{1} << j;
    for (std::size_t hi = 0; hi < dim; hi += 2 * low) {
      for (std::size_t lo = 0; lo < low; ++lo) {
        const std::size_t i0 = hi + lo;
        const std::size_t i1 = i0 + low;
        const cplx a0 = a[i0];
        const cplx a1 = a[i1];
        a[i0] = u00 * a0 + u01 * a1;
        a[i1] = u10 * a0 + u11 * a1;
      }
    }
  }
}

void evolve_step(StateVector& state, const CompiledOperator& h, double duration,
                 const EvolveOptions& options) {
  if (duration < 0.0)
    throw std::invalid_argument("evolve_step: duration must be >= 0");
  if (duration == 0.0) return;
  if (state.site_count != h.site_count())
    throw std::invalid_argument("evolve_step: state/operator size mismatch");

  const std::size_t dim = h.dimension();
  const int m_max = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(options.max_krylov), dim));

  const double beta0 = state.norm();
  if (beta0 == 0.0) throw std::invalid_argument("evolve_step: zero state");

  // Lanczos basis in one flat buffer; slot j+1 doubles as the residual w.
  std::vector<cplx> basis(static_cast<std::size_t>(m_max + 1) * dim);
  {
    const double inv = 1.0 / beta0;
    for (std::size_t s = 0; s < dim; ++s) basis[s] = inv * state.amplitudes[s];
  }

  std::vector<double> alpha, beta;
  Eigen::VectorXcd y_prev;
  bool converged = false;
  bool last_close = false;

  for (int j = 0; j < m_max && !converged; ++j) {
    const cplx* vj = basis.data() + static_cast<std::size_t>(j) * dim;
    cplx* w = basis.data() + static_cast<std::size_t>(j + 1) * dim;
    h.apply({vj, dim}, {w, dim});
    cplx dot(0.0, 0.0);
    if (j > 0) {
      const double b = beta[j - 1];
      const cplx* prev = vj - dim;
      for (std::size_t s = 0; s < dim; ++s) {
        w[s] -= b * prev[s];
        dot += std::conj(vj[s]) * w[s];
      }
    } else {
      for (std::size_t s = 0; s < dim; ++s) dot += std::conj(vj[s]) * w[s];
    }
    const double a = dot.real();
    double norm2 = 0.0;
    for (std::size_t s = 0; s < dim; ++s) {
      w[s] -= a * vj[s];
      norm2 += std::norm(w[s]);
    }
    if (options.reorthogonalize || j >= 24) {
      for (int i = 0; i <= j; ++i) {
        cplx overlap(0.0, 0.0);
        const cplx* vi = basis.data() + static_cast<std::size_t>(i) * dim;
        for (std::size_t s = 0; s < dim; ++s) overlap += std::conj(vi[s]) * w[s];
        for (std::size_t s = 0; s < dim; ++s) w[s] -= overlap * vi[s];
      }
      norm2 = 0.0;
      for (std::size_t s = 0; s < dim; ++s) norm2 += std::norm(w[s]);
    }
    alpha.push_back(a);
    double b_next = std::sqrt(norm2);

    // e^{-i duration T_m} e_1 in the Krylov basis
    const int m = j + 1;
    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd sub(m > 1 ? m - 1 : 1);
    for (int i = 0; i + 1 < m; ++i) sub[i] = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    if (m == 1) {
      Eigen::MatrixXd t(1, 1);
      t(0, 0) = alpha[0];
      es.compute(t);
    } else {
      es.computeFromTridiagonal(diag, sub.head(m - 1));
    }
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::VectorXcd phases(m);
    for (int i = 0; i < m; ++i)
      phases[i] = std::exp(cplx(0.0, -duration * lam[i])) * q(0, i);
    Eigen::VectorXcd y = q * phases;  // q real: y_k = sum_i q(k,i) e^{-i d l_i} q(0,i)

    double delta;
    if (j == 0) {
      delta = 1.0;
    } else {
      delta = 0.0;
      for (int i = 0; i < m - 1; ++i) delta += std::norm(y[i] - y_prev[i]);
      delta += std::norm(y[m - 1]);
      delta = std::sqrt(delta);
    }
    y_prev = y;

    const bool close = delta <= 0.5 * options.tol;
    const bool breakdown = b_next <= 1e-14 * std::max(1.0, std::fabs(a));
    if ((close && last_close) || breakdown || m == static_cast<int>(dim)) {
      converged = true;
    } else if (j + 1 < m_max) {
      last_close = close;
      beta.push_back(b_next);
      const double inv = 1.0 / b_next;
      for (std::size_t s = 0; s < dim; ++s) w[s] *= inv;
    }
  }

  if (!converged)
    throw std::runtime_error("step too large; reduce duration or raise budget");

  const int m = static_cast<int>(y_prev.size());
  std::fill(state.amplitudes.begin(), state.amplitudes.end(), cplx(0.0, 0.0));
  for (int i = 0; i < m; ++i) {
    const cplx coeff = beta0 * y_prev[i];
    const cplx* vi = basis.data() + static_cast<std::size_t>(i) * dim;
    for (std::size_t s = 0; s < dim; ++s) state.amplitudes[s] += coeff * vi[s];
  }

  const double drift = std::fabs(state.norm() - beta0);
  if (drift >= kNormDriftTol)
    throw std::runtime_error(
        "evolve_step: norm drift exceeded internal-consistency bound");
  const double scale = beta0 / state.norm();
  for (cplx& v : state.amplitudes) v *= scale;
}

StateVector evolved_state(int site_count, double t_d, const TermOperator& h,
                          double tol) {
  StateVector psi = polarized_state(site_count, Axis::X, +1);
  if (t_d == 0.0) return psi;
  const CompiledOperator kernel(h);
  EvolveOptions opt;
  opt.tol = tol;
  long segments = 1;
  for (;;) {
    StateVector trial = psi;
    try {
      for (long k = 0; k < segments; ++k)
        evolve_step(trial, kernel, t_d / static_cast<double>(segments), opt);
      return trial;
    } catch (const std::runtime_error&) {
      segments *= 2;
      if (segments > 1024) throw;
    }
  }
}

namespace {

// x, y, z expectations of the collective spin plus the squared norm, fused.
std::array<double, 4> measure_with_norm(const StateVector& state) {
  const auto& a = state.amplitudes;
  const std::size_t dim = a.size();
  const int count = state.site_count;

  double norm2 = 0.0;
  double iz = 0.0;
  for (std::size_t s = 0; s < dim; ++s) {
    const double p = std::norm(a[s]);
    norm2 += p;
    iz += p * (0.5 * count - std::popcount(s));
  }
  double ix = 0.0, iy = 0.0;
  for (int j = 0; j < count; ++j) {
    const std::size_t low = std::size_t{1} << j;
    double rex = 0.0, imy = 0.0;
    for (std::size_t hi = 0; hi < dim; hi += 2 * low) {
      for (std::size_t lo = 0; lo < low; ++lo) {
        const std::size_t i0 = hi + lo;
        const cplx w = std::conj(a[i0]) * a[i0 + low];
        rex += w.real();
        imy += w.imag();
      }
    }
    ix += rex;
    iy += imy;
  }
  const double scale = 2.0 / count;
  return {scale * ix, scale * iy, scale * iz, norm2};
}

}  // namespace

std::array<double, 3> measure_magnetization(const StateVector& state) {
  const auto m = measure_with_norm(state);
  return {m[0], m[1], m[2]};
}

std::array<double, 3> slow_axis_vector(SlowAxis axis) {
  return axis == SlowAxis::Y ? std::array<double, 3>{0.0, 1.0, 0.0}
                             : std::array<double, 3>{0.0, 0.0, 1.0};
}

void DriveProtocol::validate() const {
  if (fast_pulses < 1)
    throw std::invalid_argument("DriveProtocol: fast_pulses must be >= 1");
  if (cycles < 1) throw std::invalid_argument("DriveProtocol: cycles must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("DriveProtocol: tau must be > 0");
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0))
    throw std::invalid_argument("DriveProtocol: noise fraction must be in [0, 1)");
  if (!std::isfinite(theta) || !std::isfinite(gamma))
    throw std::invalid_argument("DriveProtocol: angles must be finite");
}

TimeSeries run_protocol(const CouplingSet& couplings,
                        const DriveProtocol& protocol, HamiltonianChoice choice,
                        const EvolveOptions& options,
                        const StateVector* initial, double stop_below) {
  protocol.validate();
  const int count = couplings.count;
  if (initial && initial->site_count != count)
    throw std::invalid_argument("run_protocol: initial state size mismatch");

  const TermOperator h = (choice == HamiltonianChoice::FullSystem)
                             ? build_system_hamiltonian(couplings)
                             : leading_effective_hamiltonian(couplings);
  const CompiledOperator kernel(h);

  StateVector psi = initial ? *initial : polarized_state(count, Axis::X, +1);
  Rng noise(derive_seed(protocol.noise_seed, 2));
  const RotationSpec fast{{1.0, 0.0, 0.0}, protocol.theta};
  const RotationSpec slow{slow_axis_vector(protocol.slow_axis), protocol.gamma};
  const bool per_kick = protocol.measure_every == MeasureEvery::FastKick;
  const double delta = protocol.noise_fraction;

  TimeSeries series;
  series.protocol = protocol;
  series.hamiltonian = choice;
  series.site_count = count;
  if (per_kick)
    series.records.reserve(protocol.cycles * (protocol.fast_pulses + 1));
  else
    series.records.reserve(protocol.cycles);

  long kick = 0;
  double t = 0.0;
  auto record = [&](long cycle) {
    const auto m = measure_with_norm(psi);
    series.records.push_back(
        {kick, cycle, t, m[0], m[1], m[2], std::sqrt(m[3])});
  };

  double first_pre_kick = 0.0;
  for (long cycle = 1; cycle <= protocol.cycles; ++cycle) {
    if (choice == HamiltonianChoice::FullSystem) {
      for (long n = 0; n < protocol.fast_pulses; ++n) {
        apply_collective_rotation(psi, fast);
        ++kick;
        double tau_n = protocol.tau;
        if (delta > 0.0)
          tau_n += noise.uniform(-delta * protocol.tau, delta * protocol.tau);
        evolve_step(psi, kernel, tau_n, options);
        t += tau_n;
        if (per_kick) record(cycle);
      }
    } else {
      double tau_n = protocol.tau;
      if (delta > 0.0)
        tau_n += noise.uniform(-delta * protocol.tau, delta * protocol.tau);
      const double span = static_cast<double>(protocol.fast_pulses) * tau_n;
      evolve_step(psi, kernel, span, options);
      t += span;
      kick += protocol.fast_pulses;
      if (per_kick) record(cycle);
    }
    if (!per_kick) record(cycle);  // immediately before the slow kick
    if (stop_below > 0.0) {
      const double pre_kick_x = std::fabs(series.records.back().x);
      if (cycle == 1) first_pre_kick = pre_kick_x;
      if (cycle > 1 && pre_kick_x < stop_below * first_pre_kick) break;
    }
    apply_collective_rotation(psi, slow);
    ++kick;
    if (per_kick) record(cycle);
  }
  return series;
}

void TimeSeries::write_csv(std::ostream& out) const {
  out << "# spinkick series v1\n";
  out << "# code_version=" << kVersion << "\n";
  out << "# sites=" << site_count << " graph_seed=" << graph_seed
      << " coupling_scale=" << format_double(coupling_scale) << "\n";
  out << "# hamiltonian="
      << (hamiltonian == HamiltonianChoice::FullSystem ? "full" : "idealized")
      << " theta=" << format_double(protocol.theta)
      << " gamma=" << format_double(protocol.gamma)
      << " tau=" << format_double(protocol.tau)
      << " fast_pulses=" << protocol.fast_pulses
      << " cycles=" << protocol.cycles
      << " slow_axis=" << (protocol.slow_axis == SlowAxis::Y ? 'y' : 'z')
      << " noise_fraction=" << format_double(protocol.noise_fraction)
      << " noise_seed=" << protocol.noise_seed << " measure_every="
      << (protocol.measure_every == MeasureEvery::FastKick ? "fast_kick"
                                                           : "floquet_cycle")
      << "\n";
  out << "kick_index,cycle_index,time,x,y,z,norm\n";
  for (const auto& r : records) {
    out << r.kick_index << "," << r.cycle_index << "," << format_double(r.time)
        << "," << format_double(r.x) << "," << format_double(r.y) << ","
        << format_double(r.z) << "," << format_double(r.norm) << "\n";
  }
}

}  // namespace spinkick
