#include "spinkick/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace spinkick {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMergeTol = 1e-15;
constexpr double kSingularSinTol = 1e-9;

bool factor_order(const PauliFactor& a, const PauliFactor& b) {
  if (a.site != b.site) return a.site < b.site;
  return static_cast<int>(a.axis) < static_cast<int>(b.axis);
}

bool term_structure_less(const PauliTerm& a, const PauliTerm& b) {
  if (a.factors.size() != b.factors.size())
    return a.factors.size() < b.factors.size();
  for (std::size_t i = 0; i < a.factors.size(); ++i) {
    if (a.factors[i].site != b.factors[i].site)
      return a.factors[i].site < b.factors[i].site;
    if (a.factors[i].axis != b.factors[i].axis)
      return static_cast<int>(a.factors[i].axis) < static_cast<int>(b.factors[i].axis);
  }
  return false;
}

bool same_structure(const PauliTerm& a, const PauliTerm& b) {
  return a.factors == b.factors;
}

// quaternion (w, v) for the SU(2) element cos(angle/2) 1 - i sin(angle/2) n.sigma
struct Quat {
  double w = 1.0;
  std::array<double, 3> v{0.0, 0.0, 0.0};
};

Quat axis_quat(const std::array<double, 3>& axis, double angle) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (n == 0.0) throw std::invalid_argument("rotation axis must be nonzero");
  const double s = std::sin(angle / 2) / n;
  return {std::cos(angle / 2), {s * axis[0], s * axis[1], s * axis[2]}};
}

// product in operator order: result = a * b (b acts first)
Quat quat_mul(const Quat& a, const Quat& b) {
  Quat r;
  r.w = a.w * b.w - (a.v[0] * b.v[0] + a.v[1] * b.v[1] + a.v[2] * b.v[2]);
  r.v[0] = a.w * b.v[0] + b.w * a.v[0] + (a.v[1] * b.v[2] - a.v[2] * b.v[1]);
  r.v[1] = a.w * b.v[1] + b.w * a.v[1] + (a.v[2] * b.v[0] - a.v[0] * b.v[2]);
  r.v[2] = a.w * b.v[2] + b.w * a.v[2] + (a.v[0] * b.v[1] - a.v[1] * b.v[0]);
  return r;
}

}  // namespace

char axis_letter(Axis axis) {
  switch (axis) {
    case Axis::X: return 'x';
    case Axis::Y: return 'y';
    case Axis::Z: return 'z';
  }
  return '?';
}

TermOperator::TermOperator(int site_count, std::vector<PauliTerm> terms)
    : site_count_(site_count), terms_(std::move(terms)) {
  if (site_count < 1)
    throw std::invalid_argument("TermOperator: site count must be >= 1");
  for (auto& term : terms_) {
    std::sort(term.factors.begin(), term.factors.end(), factor_order);
    for (std::size_t i = 0; i < term.factors.size(); ++i) {
      const auto& f = term.factors[i];
      if (f.site < 0 || f.site >= site_count)
        throw std::invalid_argument("TermOperator: factor site out of range");
      if (i > 0 && term.factors[i - 1].site == f.site)
        throw std::invalid_argument("TermOperator: duplicate site within a term");
    }
  }
  std::sort(terms_.begin(), terms_.end(), term_structure_less);
  std::vector<PauliTerm> merged;
  merged.reserve(terms_.size());
  for (auto& term : terms_) {
    if (!merged.empty() && same_structure(merged.back(), term)) {
      merged.back().coeff += term.coeff;
    } else {
      merged.push_back(std::move(term));
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const PauliTerm& t) {
                                return std::fabs(t.coeff) < kMergeTol;
                              }),
               merged.end());
  terms_ = std::move(merged);
}

TermOperator operator+(const TermOperator& a, const TermOperator& b) {
  if (a.site_count_ != b.site_count_)
    throw std::invalid_argument("TermOperator: site count mismatch");
  std::vector<PauliTerm> terms = a.terms_;
  terms.insert(terms.end(), b.terms_.begin(), b.terms_.end());
  return TermOperator(a.site_count_, std::move(terms));
}

TermOperator operator*(double scale, const TermOperator& op) {
  std::vector<PauliTerm> terms = op.terms_;
  for (auto& t : terms) t.coeff *= scale;
  return TermOperator(op.site_count_, std::move(terms));
}

std::string TermOperator::to_text() const {
  std::ostringstream out;
  out << "# spinkick operator v1\n";
  out << "sites " << site_count_ << "\n";
  char buf[64];
  for (const auto& term : terms_) {
    std::snprintf(buf, sizeof(buf), "%.17g", term.coeff);
    out << buf;
    for (const auto& f : term.factors)
      out << " " << f.site << ":" << axis_letter(f.axis);
    out << "\n";
  }
  return out.str();
}

TermOperator TermOperator::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "# spinkick operator v1")
    throw std::runtime_error("TermOperator::from_text: unrecognized format");
  std::string word;
  int sites = 0;
  in >> word >> sites;
  if (word != "sites" || sites < 1)
    throw std::runtime_error("TermOperator::from_text: bad site count");
  std::getline(in, line);
  std::vector<PauliTerm> terms;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    PauliTerm term;
    ls >> term.coeff;
    std::string tok;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon + 2 != tok.size())
        throw std::runtime_error("TermOperator::from_text: bad factor " + tok);
      PauliFactor f;
      f.site = std::stoi(tok.substr(0, colon));
      switch (tok[colon + 1]) {
        case 'x': f.axis = Axis::X; break;
        case 'y': f.axis = Axis::Y; break;
        case 'z': f.axis = Axis::Z; break;
        default:
          throw std::runtime_error("TermOperator::from_text: bad axis in " + tok);
      }
      term.factors.push_back(f);
    }
    terms.push_back(std::move(term));
  }
  return TermOperator(sites, std::move(terms));
}

double max_coefficient_difference(const TermOperator& a, const TermOperator& b) {
  double worst = 0.0;
  std::size_t i = 0, j = 0;
  const auto& ta = a.terms();
  const auto& tb = b.terms();
  while (i < ta.size() || j < tb.size()) {
    if (j == tb.size() ||
        (i < ta.size() && term_structure_less(ta[i], tb[j]))) {
      worst = std::max(worst, std::fabs(ta[i].coeff));
      ++i;
    } else if (i == ta.size() || term_structure_less(tb[j], ta[i])) {
      worst = std::max(worst, std::fabs(tb[j].coeff));
      ++j;
    } else {
      worst = std::max(worst, std::fabs(ta[i].coeff - tb[j].coeff));
      ++i;
      ++j;
    }
  }
  return worst;
}

TermOperator collective_spin(int site_count, Axis axis) {
  std::vector<PauliTerm> terms;
  terms.reserve(site_count);
  for (int j = 0; j < site_count; ++j)
    terms.push_back({1.0, {{j, axis}}});
  return TermOperator(site_count, std::move(terms));
}

TermOperator build_system_hamiltonian(const CouplingSet& cs) {
  std::vector<PauliTerm> terms;
  const int n = cs.count;
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double b = cs.coupling(j, k);
      if (b == 0.0) continue;
      terms.push_back({2.0 * b, {{j, Axis::Z}, {k, Axis::Z}}});
      terms.push_back({-b, {{j, Axis::X}, {k, Axis::X}}});
      terms.push_back({-b, {{j, Axis::Y}, {k, Axis::Y}}});
    }
  }
  for (int j = 0; j < n; ++j) {
    if (cs.c[j] != 0.0) terms.push_back({cs.c[j], {{j, Axis::Z}}});
  }
  return TermOperator(n, std::move(terms));
}

TermOperator leading_effective_hamiltonian(const CouplingSet& cs) {
  std::vector<PauliTerm> terms;
  const int n = cs.count;
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double b = cs.coupling(j, k);
      if (b == 0.0) continue;
      // 3/2 (IzIz + IyIy) - (IxIx + IyIy + IzIz)
      terms.push_back({0.5 * b, {{j, Axis::Z}, {k, Axis::Z}}});
      terms.push_back({0.5 * b, {{j, Axis::Y}, {k, Axis::Y}}});
      terms.push_back({-b, {{j, Axis::X}, {k, Axis::X}}});
    }
  }
  return TermOperator(n, std::move(terms));
}

std::pair<double, double> lattice_sum_factors(long pulses, double theta) {
  if (pulses < 1)
    throw std::invalid_argument("lattice_sum_factors: need N >= 1");
  const double n = static_cast<double>(pulses);
  const double s = std::sin(theta);
  if (std::fabs(s) < kSingularSinTol) {
    // sin(theta) ~ 0: evaluate (1/N) sum_n cos/sin(2 n theta) directly
    double gc = 0.0, gs = 0.0;
    for (long k = 1; k <= pulses; ++k) {
      gc += std::cos(2.0 * k * theta);
      gs += std::sin(2.0 * k * theta);
    }
    return {gc / n, gs / n};
  }
  const double envelope = std::sin(n * theta) / s / n;
  return {envelope * std::cos((n + 1) * theta),
          envelope * std::sin((n + 1) * theta)};
}

TermOperator toggling_effective_hamiltonian(const CouplingSet& cs, long pulses,
                                            double theta) {
  if (pulses < 1)
    throw std::invalid_argument("toggling_effective_hamiltonian: need N >= 1");
  const auto [gc, gs] = lattice_sum_factors(pulses, theta);
  const auto [gc2, gs2] = lattice_sum_factors(pulses, theta / 2);

  std::vector<PauliTerm> terms;
  const int n = cs.count;
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double b = cs.coupling(j, k);
      if (b == 0.0) continue;
      // 3/2 [H_ff + G_c H_dq - G_s H~_ff] - I.I with
      // H_ff/dq = IzIz +/- IyIy, H~_ff = IzIy + IyIz
      terms.push_back({b * (1.5 * (1.0 + gc) - 1.0), {{j, Axis::Z}, {k, Axis::Z}}});
      terms.push_back({b * (1.5 * (1.0 - gc) - 1.0), {{j, Axis::Y}, {k, Axis::Y}}});
      terms.push_back({-b, {{j, Axis::X}, {k, Axis::X}}});
      terms.push_back({-1.5 * b * gs, {{j, Axis::Z}, {k, Axis::Y}}});
      terms.push_back({-1.5 * b * gs, {{j, Axis::Y}, {k, Axis::Z}}});
    }
  }
  for (int j = 0; j < n; ++j) {
    if (cs.c[j] == 0.0) continue;
    terms.push_back({cs.c[j] * gc2, {{j, Axis::Z}}});
    terms.push_back({-cs.c[j] * gs2, {{j, Axis::Y}}});
  }
  return TermOperator(n, std::move(terms));
}

TermOperator replica_floquet_hamiltonian(const CouplingSet& cs, double tau,
                                         double theta) {
  if (std::fabs(theta - kPi / 2) > 1e-12)
    throw std::invalid_argument("replica form available only at theta=pi/2");
  if (!(tau > 0.0))
    throw std::invalid_argument("replica_floquet_hamiltonian: tau must be > 0");

  const double norm = kPi / 2 + tau;
  std::vector<PauliTerm> terms;
  const int n = cs.count;
  // (pi/2) Ix
  for (int j = 0; j < n; ++j)
    terms.push_back({kPi / 2 / norm, {{j, Axis::X}}});
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double b = cs.coupling(j, k);
      if (b == 0.0) continue;
      // tau Hbar
      terms.push_back({tau * 0.5 * b / norm, {{j, Axis::Z}, {k, Axis::Z}}});
      terms.push_back({tau * 0.5 * b / norm, {{j, Axis::Y}, {k, Axis::Y}}});
      terms.push_back({-tau * b / norm, {{j, Axis::X}, {k, Axis::X}}});
      // -tau (3 pi/4) b H~_ff
      const double w = -tau * 0.75 * kPi * b / norm;
      terms.push_back({w, {{j, Axis::Z}, {k, Axis::Y}}});
      terms.push_back({w, {{j, Axis::Y}, {k, Axis::Z}}});
    }
  }
  // -tau (pi/4) c_j (I_jy - I_jz)
  for (int j = 0; j < n; ++j) {
    if (cs.c[j] == 0.0) continue;
    terms.push_back({-tau * kPi / 4 * cs.c[j] / norm, {{j, Axis::Y}}});
    terms.push_back({tau * kPi / 4 * cs.c[j] / norm, {{j, Axis::Z}}});
  }
  return TermOperator(n, std::move(terms));
}

RotationSpec composite_rotation(long pulses, double theta, double gamma,
                                std::array<double, 3> slow_axis) {
  Quat x = axis_quat({1.0, 0.0, 0.0}, static_cast<double>(pulses) * theta);
  Quat z = axis_quat(slow_axis, gamma);
  Quat q = quat_mul(x, z);  // U_x^N applied after U_z

  const double vnorm =
      std::sqrt(q.v[0] * q.v[0] + q.v[1] * q.v[1] + q.v[2] * q.v[2]);
  RotationSpec rot;
  if (vnorm < 1e-14) {
    rot.axis = {0.0, 0.0, 1.0};
    rot.angle = 0.0;
    return rot;
  }
  rot.angle = 2.0 * std::atan2(vnorm, q.w);  // in [0, 2 pi)
  if (rot.angle >= 2.0 * kPi) rot.angle -= 2.0 * kPi;
  rot.axis = {q.v[0] / vnorm, q.v[1] / vnorm, q.v[2] / vnorm};
  return rot;
}

double boundary_phase(long kicks, long l, long pulses) {
  if (l % 2 == 0) return 0.0;  // full 2 pi kicks are inactive (0/0 limit)
  const double n8 = static_cast<double>(((pulses % 8) + 8) % 8);
  // odd l: d = pi ((-1)^M - 1) (N mod 8) / 4
  const double sign_m = (kicks % 2 == 0) ? 1.0 : -1.0;
  return kPi * (sign_m - 1.0) * n8 / 4.0;
}

TermOperator small_n_two_cycle_hamiltonian(const CouplingSet& cs, long pulses,
                                           double theta, double gamma) {
  if (pulses != 9 || std::fabs(theta - kPi / 2) > 1e-12 ||
      std::fabs(gamma - kPi) > 1e-12)
    throw std::invalid_argument(
        "closed form not derived in paper; use toggling oracle");
  TermOperator out = leading_effective_hamiltonian(cs);
  std::vector<PauliTerm> extra;
  const double w = 1.0 / (2.0 * static_cast<double>(pulses));
  for (int j = 0; j < cs.count; ++j) {
    if (cs.c[j] == 0.0) continue;
    extra.push_back({w * cs.c[j], {{j, Axis::Z}}});
    extra.push_back({-w * cs.c[j], {{j, Axis::Y}}});
  }
  return out + TermOperator(cs.count, std::move(extra));
}

}  // namespace spinkick
