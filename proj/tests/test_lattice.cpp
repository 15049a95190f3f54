#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "spinkick/lattice.hpp"
#include "spinkick/rng.hpp"

using namespace spinkick;

namespace {

constexpr double kPi = std::numbers::pi;

double pair_distance(const SpinGraph& g, int j, int k) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double diff = g.positions[j][d] - g.positions[k][d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

CouplingSet two_spin_set(double b) {
  CouplingSet cs;
  cs.count = 2;
  cs.b = {0.0, b, b, 0.0};
  cs.c = {0.0, 0.0};
  cs.median_b = std::fabs(b);
  return cs;
}

}  // namespace

TEST_CASE("graph rules hold for the paper-scale instance") {
  const SpinGraph g = generate_graph(14, 0.7, 0.8, 12345);
  REQUIRE(g.positions.size() == 14);
  for (int j = 0; j < g.count; ++j) {
    bool has_partner = false;
    for (int k = 0; k < g.count; ++k) {
      if (j == k) continue;
      const double r = pair_distance(g, j, k);
      CHECK(r >= g.r_min);
      if (r < g.r_max) has_partner = true;
    }
    CHECK(has_partner);
  }
}

TEST_CASE("single spin sits at the origin with vacuous constraints") {
  const SpinGraph g = generate_graph(1, 0.7, 0.8, 7);
  REQUIRE(g.positions.size() == 1);
  CHECK(g.positions[0][0] == 0.0);
  CHECK(g.positions[0][1] == 0.0);
  CHECK(g.positions[0][2] == 0.0);
}

TEST_CASE("generation is bit-identical for identical inputs") {
  const SpinGraph a = generate_graph(6, 0.7, 0.8, 99);
  const SpinGraph b = generate_graph(6, 0.7, 0.8, 99);
  REQUIRE(a.positions.size() == b.positions.size());
  CHECK(std::memcmp(a.positions.data(), b.positions.data(),
                    a.positions.size() * sizeof(a.positions[0])) == 0);
  const SpinGraph c = generate_graph(6, 0.7, 0.8, 100);
  CHECK(std::memcmp(a.positions.data(), c.positions.data(),
                    a.positions.size() * sizeof(a.positions[0])) != 0);
}

TEST_CASE("infeasible parameters exhaust the proposal budget") {
  GraphOptions options;
  options.max_rejections = 2000;
  options.box_factor = 50.0;  // partner condition nearly impossible to hit
  CHECK_THROWS_WITH_AS(generate_graph(40, 0.79, 0.8, 3, options),
                       "graph infeasible for given parameters",
                       std::runtime_error);
}

TEST_CASE("two spins along the field axis couple at (1/4pi)*2") {
  SpinGraph g;
  g.count = 2;
  g.r_min = 0.5;
  g.r_max = 1.5;
  g.positions = {{0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}};
  const CouplingSet cs = compute_couplings(g);
  CHECK(cs.coupling(0, 1) == doctest::Approx(2.0 / (4.0 * kPi)).epsilon(1e-14));
  CHECK(cs.coupling(0, 1) == doctest::Approx(0.1592).epsilon(1e-3));
  CHECK(cs.coupling(0, 0) == 0.0);
  CHECK(cs.coupling(0, 1) == cs.coupling(1, 0));
}

TEST_CASE("magic-angle pair decouples") {
  SpinGraph g;
  g.count = 2;
  g.r_min = 0.5;
  g.r_max = 1.5;
  const double c = 1.0 / std::sqrt(3.0);  // cos^2 = 1/3
  const double s = std::sqrt(2.0 / 3.0);
  g.positions = {{0.0, 0.0, 0.0}, {s, 0.0, c}};
  const CouplingSet cs = compute_couplings(g);
  CHECK(std::fabs(cs.coupling(0, 1)) < 1e-15);
}

TEST_CASE("coupling sign follows cos^2(alpha) > 1/3") {
  const SpinGraph g = generate_graph(10, 0.7, 0.8, 21);
  const CouplingSet cs = compute_couplings(g);
  for (int j = 0; j < g.count; ++j) {
    for (int k = j + 1; k < g.count; ++k) {
      double rz = g.positions[k][2] - g.positions[j][2];
      const double r = pair_distance(g, j, k);
      const double cos2 = (rz / r) * (rz / r);
      if (cos2 > 1.0 / 3.0 + 1e-12) CHECK(cs.coupling(j, k) > 0.0);
      if (cos2 < 1.0 / 3.0 - 1e-12) CHECK(cs.coupling(j, k) < 0.0);
    }
  }
}

TEST_CASE("scaling positions by 2 scales couplings by exactly 1/8") {
  const SpinGraph g = generate_graph(8, 0.7, 0.8, 5);
  const CouplingSet cs = compute_couplings(g);
  SpinGraph doubled = g;
  for (auto& p : doubled.positions)
    for (double& v : p) v *= 2.0;
  const CouplingSet scaled = compute_couplings(doubled);
  for (int j = 0; j < g.count; ++j)
    for (int k = 0; k < g.count; ++k)
      CHECK(scaled.coupling(j, k) == cs.coupling(j, k) / 8.0);  // power of two
}

TEST_CASE("general rescaling follows s^-3 within rounding") {
  const SpinGraph g = generate_graph(6, 0.7, 0.8, 31);
  const CouplingSet cs = compute_couplings(g);
  const double s = 1.7;
  SpinGraph scaled_graph = g;
  for (auto& p : scaled_graph.positions)
    for (double& v : p) v *= s;
  const CouplingSet scaled = compute_couplings(scaled_graph);
  for (int j = 0; j < g.count; ++j)
    for (int k = 0; k < g.count; ++k) {
      if (j == k) continue;
      CHECK(scaled.coupling(j, k) ==
            doctest::Approx(cs.coupling(j, k) / (s * s * s)).epsilon(1e-12));
    }
}

TEST_CASE("median coupling is over |b| of connected pairs only") {
  SpinGraph g;
  g.count = 3;
  g.r_min = 0.5;
  g.r_max = 1.1;
  // pair (0,1) connected along z, pair (0,2)/(1,2) far away
  g.positions = {{0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}, {5.0, 0.0, 0.0}};
  const CouplingSet cs = compute_couplings(g);
  CHECK(cs.median_b == doctest::Approx(std::fabs(cs.coupling(0, 1))).epsilon(1e-15));
}

TEST_CASE("disorder sampling is reproducible and respects sigma = 0") {
  const SpinGraph g = generate_graph(6, 0.7, 0.8, 77);
  const CouplingSet cs = compute_couplings(g);

  const CouplingSet zero_width = sample_disorder(cs, 0.25, 0.0, 9);
  for (double c : zero_width.c) CHECK(c == 0.25);

  const CouplingSet a = sample_disorder(cs, cs.median_b, 10.0 * cs.median_b, 5);
  const CouplingSet b = sample_disorder(cs, cs.median_b, 10.0 * cs.median_b, 5);
  CHECK(std::memcmp(a.c.data(), b.c.data(), a.c.size() * sizeof(double)) == 0);
}

TEST_CASE("disorder sample mean obeys the standard-error bound") {
  CouplingSet cs;
  cs.count = 10000;
  cs.b.assign(static_cast<std::size_t>(cs.count) * cs.count, 0.0);
  cs.c.assign(cs.count, 0.0);
  const double mean = 1.3;
  const double sigma = 0.7;
  const CouplingSet sampled = sample_disorder(cs, mean, sigma, 2024);
  double acc = 0.0;
  for (double c : sampled.c) acc += c;
  acc /= cs.count;
  CHECK(std::fabs(acc - mean) < 5.0 * sigma / std::sqrt(cs.count));
}

TEST_CASE("coupling scale rejects a single spin") {
  CouplingSet cs;
  cs.count = 1;
  cs.b = {0.0};
  cs.c = {0.0};
  CHECK_THROWS_AS(estimate_coupling_scale(cs, 0.1, 10.0), std::invalid_argument);
}

TEST_CASE("two-spin coupling scale matches the analytic propagator") {
  // <x>(t) = cos(3 b t / 2) for a bare dipolar pair, so the 1/e crossing is
  // at tau_d = 2 arccos(1/e) / (3 b).
  const double b = 0.8;
  const CouplingSet cs = two_spin_set(b);
  const double tau_d = 2.0 * std::acos(std::exp(-1.0)) / (3.0 * b);
  const double j_exact = 1.0 / tau_d;
  const double j = estimate_coupling_scale(cs, tau_d / 100.0, 10.0 * tau_d);
  CHECK(j == doctest::Approx(j_exact).epsilon(1e-3));
}

TEST_CASE("unresolved decay reports an error") {
  const CouplingSet cs = two_spin_set(1e-3);
  CHECK_THROWS_WITH_AS(estimate_coupling_scale(cs, 0.1, 1.0),
                       "scale not resolved; increase t_max", std::runtime_error);
}

TEST_CASE("graph file round-trips bit-exactly") {
  const SpinGraph g = generate_graph(7, 0.7, 0.8, 4242);
  CouplingSet cs = compute_couplings(g);
  cs = sample_disorder(cs, cs.median_b, 10.0 * cs.median_b, 11);

  const auto path = std::filesystem::temp_directory_path() / "spinkick_graph_test.txt";
  save_graph(g, cs, path);
  const auto [g2, cs2] = load_graph(path);
  std::filesystem::remove(path);

  REQUIRE(g2.count == g.count);
  CHECK(g2.r_min == g.r_min);
  CHECK(g2.r_max == g.r_max);
  CHECK(g2.seed == g.seed);
  CHECK(std::memcmp(g2.positions.data(), g.positions.data(),
                    g.positions.size() * sizeof(g.positions[0])) == 0);
  CHECK(std::memcmp(cs2.b.data(), cs.b.data(), cs.b.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(cs2.c.data(), cs.c.data(), cs.c.size() * sizeof(double)) == 0);
  CHECK(cs2.median_b == cs.median_b);
}
