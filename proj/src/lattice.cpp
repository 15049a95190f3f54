#include "spinkick/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "spinkick/engine.hpp"
#include "spinkick/operators.hpp"
#include "spinkick/rng.hpp"

namespace spinkick {

namespace {

double distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SpinGraph generate_graph(int count, double r_min, double r_max,
                         std::uint64_t seed, const GraphOptions& options) {
  if (count < 1) throw std::invalid_argument("generate_graph: count must be >= 1");
  if (!(0.0 < r_min && r_min < r_max))
    throw std::invalid_argument("generate_graph: need 0 < r_min < r_max");

  SpinGraph graph;
  graph.count = count;
  graph.r_min = r_min;
  graph.r_max = r_max;
  graph.seed = seed;
  graph.positions.reserve(count);
  graph.positions.push_back({0.0, 0.0, 0.0});

  const double side =
      r_max * std::ceil(std::cbrt(static_cast<double>(count))) * options.box_factor;
  Rng rng(derive_seed(seed, 0));

  std::uint64_t rejected = 0;
  while (graph.positions.size() < static_cast<std::size_t>(count)) {
    std::array<double, 3> p{};
    for (int d = 0; d < 3; ++d) p[d] = rng.uniform(-side / 2, side / 2);

    bool respects_min = true;
    bool has_partner = false;
    for (const auto& q : graph.positions) {
      const double r = distance(p, q);
      if (r < r_min) {
        respects_min = false;
        break;
      }
      if (r < r_max) has_partner = true;
    }
    if (respects_min && has_partner) {
      graph.positions.push_back(p);
    } else if (++rejected >= options.max_rejections) {
      throw std::runtime_error("graph infeasible for given parameters");
    }
  }
  return graph;
}

CouplingSet compute_couplings(const SpinGraph& graph,
                              std::array<double, 3> field_axis) {
  const double axis_norm = std::sqrt(field_axis[0] * field_axis[0] +
                                     field_axis[1] * field_axis[1] +
                                     field_axis[2] * field_axis[2]);
  if (axis_norm == 0.0)
    throw std::invalid_argument("compute_couplings: field axis must be nonzero");

  const int n = graph.count;
  CouplingSet cs;
  cs.count = n;
  cs.field_axis = field_axis;
  cs.b.assign(static_cast<std::size_t>(n) * n, 0.0);
  cs.c.assign(n, 0.0);

  std::vector<double> connected;
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const auto& pj = graph.positions[j];
      const auto& pk = graph.positions[k];
      const double rx = pk[0] - pj[0];
      const double ry = pk[1] - pj[1];
      const double rz = pk[2] - pj[2];
      const double r = std::sqrt(rx * rx + ry * ry + rz * rz);
      if (r == 0.0)
        throw std::runtime_error("compute_couplings: coincident spin positions");
      const double cos_alpha =
          (rx * field_axis[0] + ry * field_axis[1] + rz * field_axis[2]) /
          (r * axis_norm);
      const double b =
          (3.0 * cos_alpha * cos_alpha - 1.0) / (4.0 * std::numbers::pi * (r * r * r));
      cs.b[static_cast<std::size_t>(j) * n + k] = b;
      cs.b[static_cast<std::size_t>(k) * n + j] = b;
      if (r < graph.r_max) connected.push_back(std::fabs(b));
    }
  }

  if (!connected.empty()) {
    std::sort(connected.begin(), connected.end());
    const std::size_t m = connected.size();
    cs.median_b = (m % 2 == 1)
                      ? connected[m / 2]
                      : 0.5 * (connected[m / 2 - 1] + connected[m / 2]);
  }
  return cs;
}

CouplingSet sample_disorder(const CouplingSet& couplings, double mean,
                            double sigma, std::uint64_t seed) {
  if (sigma < 0.0)
    throw std::invalid_argument("sample_disorder: sigma must be >= 0");
  CouplingSet out = couplings;
  out.disorder_seed = seed;
  Rng rng(derive_seed(seed, 1));
  for (int j = 0; j < out.count; ++j) out.c[j] = rng.normal(mean, sigma);
  return out;
}

double estimate_coupling_scale(const CouplingSet& couplings, double dt,
                               double t_max) {
  if (couplings.count < 2)
    throw std::invalid_argument(
        "estimate_coupling_scale: need at least two spins (single spin "
        "conserves <x>)");
  if (!(dt > 0.0) || !(t_max > 0.0))
    throw std::invalid_argument("estimate_coupling_scale: dt, t_max must be > 0");

  const TermOperator h = build_system_hamiltonian(couplings);
  const CompiledOperator kernel(h);
  StateVector psi = polarized_state(couplings.count, Axis::X, +1);

  const double threshold = std::exp(-1.0);
  double prev = measure_magnetization(psi)[0];  // 1 by construction
  EvolveOptions opt;
  opt.tol = 1e-12;
  const long steps = static_cast<long>(std::floor(t_max / dt + 1e-12));
  for (long k = 1; k <= steps; ++k) {
    evolve_step(psi, kernel, dt, opt);
    const double x = measure_magnetization(psi)[0];
    if (x <= threshold) {
      const double frac = (prev - threshold) / (prev - x);
      const double tau_d = (static_cast<double>(k - 1) + frac) * dt;
      return 1.0 / tau_d;
    }
    prev = x;
  }
  throw std::runtime_error("scale not resolved; increase t_max");
}

void save_graph(const SpinGraph& graph, const CouplingSet& couplings,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_graph: cannot open " + path.string());
  out << "# spinkick graph v1\n";
  out << "# lengths in cbrt(mu0*hbar*gamma_n^2); couplings are angular "
         "frequencies (hbar = 1)\n";
  out << "count " << graph.count << "\n";
  out << "r_min " << format_double(graph.r_min) << "\n";
  out << "r_max " << format_double(graph.r_max) << "\n";
  out << "seed " << graph.seed << "\n";
  out << "field_axis " << format_double(couplings.field_axis[0]) << " "
      << format_double(couplings.field_axis[1]) << " "
      << format_double(couplings.field_axis[2]) << "\n";
  out << "median_b " << format_double(couplings.median_b) << "\n";
  out << "disorder_seed " << couplings.disorder_seed << "\n";
  out << "positions\n";
  for (const auto& p : graph.positions)
    out << format_double(p[0]) << " " << format_double(p[1]) << " "
        << format_double(p[2]) << "\n";
  out << "couplings\n";
  for (int j = 0; j < couplings.count; ++j) {
    for (int k = 0; k < couplings.count; ++k) {
      if (k) out << " ";
      out << format_double(couplings.coupling(j, k));
    }
    out << "\n";
  }
  out << "fields\n";
  for (int j = 0; j < couplings.count; ++j) {
    if (j) out << " ";
    out << format_double(couplings.c[j]);
  }
  out << "\n";
}

std::pair<SpinGraph, CouplingSet> load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_graph: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "# spinkick graph v1")
    throw std::runtime_error("load_graph: unrecognized format in " + path.string());
  std::getline(in, line);  // unit note

  SpinGraph graph;
  CouplingSet cs;
  auto expect_key = [&](const char* key) {
    std::string word;
    in >> word;
    if (word != key)
      throw std::runtime_error(std::string("load_graph: expected '") + key +
                               "', got '" + word + "'");
  };
  expect_key("count");
  in >> graph.count;
  expect_key("r_min");
  in >> graph.r_min;
  expect_key("r_max");
  in >> graph.r_max;
  expect_key("seed");
  in >> graph.seed;
  expect_key("field_axis");
  in >> cs.field_axis[0] >> cs.field_axis[1] >> cs.field_axis[2];
  expect_key("median_b");
  in >> cs.median_b;
  expect_key("disorder_seed");
  in >> cs.disorder_seed;
  expect_key("positions");
  graph.positions.resize(graph.count);
  for (auto& p : graph.positions) in >> p[0] >> p[1] >> p[2];
  cs.count = graph.count;
  cs.b.assign(static_cast<std::size_t>(graph.count) * graph.count, 0.0);
  expect_key("couplings");
  for (double& v : cs.b) in >> v;
  expect_key("fields");
  cs.c.assign(graph.count, 0.0);
  for (double& v : cs.c) in >> v;
  if (!in) throw std::runtime_error("load_graph: truncated file " + path.string());
  return {graph, cs};
}

}  // namespace spinkick
