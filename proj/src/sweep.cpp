#include "spinkick/sweep.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "spinkick/oracle.hpp"
#include "spinkick/rng.hpp"
#include "spinkick/version.hpp"

namespace spinkick {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void reject_unknown_keys(const json& obj, const char* where,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) known = true;
    if (!known)
      throw ConfigError(std::string("config: unknown key '") + item.key() +
                        "' in " + where);
  }
}

template <typename T>
T require(const json& obj, const char* where, const char* key) {
  if (!obj.contains(key))
    throw ConfigError(std::string("config: missing key '") + key + "' in " +
                      where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "' in " +
                      where);
  }
}

template <typename T>
T optional_value(const json& obj, const char* where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "' in " +
                      where);
  }
}

std::vector<double> parse_double_axis(const json& node, const char* where) {
  std::vector<double> out;
  if (node.is_array()) {
    for (const auto& v : node) out.push_back(v.get<double>());
  } else if (node.is_object()) {
    reject_unknown_keys(node, where, {"linspace"});
    const auto spec = require<std::vector<double>>(node, where, "linspace");
    if (spec.size() != 3 || spec[2] < 2 ||
        spec[2] != std::floor(spec[2]))
      throw ConfigError(std::string("config: ") + where +
                        ".linspace must be [lo, hi, n>=2]");
    const int n = static_cast<int>(spec[2]);
    for (int i = 0; i < n; ++i)
      out.push_back(spec[0] + (spec[1] - spec[0]) * i / (n - 1.0));
  } else {
    throw ConfigError(std::string("config: ") + where +
                      " must be an array or {\"linspace\": [lo, hi, n]}");
  }
  if (out.empty())
    throw ConfigError(std::string("config: empty axis ") + where);
  return out;
}

std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(root, "top level",
                      {"schema_version", "graph", "disorder", "scale",
                       "protocol", "hamiltonian", "sweep", "analysis",
                       "workers", "output"});

  RunConfig cfg;
  cfg.schema_version = require<int>(root, "top level", "schema_version");
  if (cfg.schema_version != 1)
    throw ConfigError("config: unsupported schema_version");

  // graph
  {
    const json& g = require<json>(root, "top level", "graph");
    reject_unknown_keys(g, "graph",
                        {"file", "count", "r_min", "r_max", "seed",
                         "box_factor", "max_rejections"});
    if (g.contains("file")) {
      cfg.graph.file = g.at("file").get<std::string>();
    } else {
      cfg.graph.count = require<int>(g, "graph", "count");
      cfg.graph.r_min = require<double>(g, "graph", "r_min");
      cfg.graph.r_max = require<double>(g, "graph", "r_max");
      cfg.graph.seed = require<std::uint64_t>(g, "graph", "seed");
      cfg.graph.options.box_factor =
          optional_value(g, "graph", "box_factor", cfg.graph.options.box_factor);
      cfg.graph.options.max_rejections = optional_value(
          g, "graph", "max_rejections", cfg.graph.options.max_rejections);
    }
  }

  // disorder
  if (root.contains("disorder")) {
    const json& d = root.at("disorder");
    reject_unknown_keys(d, "disorder",
                        {"mean", "sigma", "mean_factor", "sigma_factor", "seed"});
    DisorderSpec spec;
    spec.seed = require<std::uint64_t>(d, "disorder", "seed");
    if (d.contains("mean") || d.contains("sigma")) {
      spec.absolute = true;
      spec.mean = require<double>(d, "disorder", "mean");
      spec.sigma = require<double>(d, "disorder", "sigma");
    } else {
      spec.mean_factor = optional_value(d, "disorder", "mean_factor", 1.0);
      spec.sigma_factor = optional_value(d, "disorder", "sigma_factor", 10.0);
    }
    cfg.disorder = spec;
  }

  // scale
  if (root.contains("scale")) {
    const json& s = root.at("scale");
    reject_unknown_keys(s, "scale", {"dt_factor", "t_max_factor"});
    cfg.scale.dt_factor = optional_value(s, "scale", "dt_factor", cfg.scale.dt_factor);
    cfg.scale.t_max_factor =
        optional_value(s, "scale", "t_max_factor", cfg.scale.t_max_factor);
  }

  // protocol
  {
    const json& p = require<json>(root, "top level", "protocol");
    reject_unknown_keys(p, "protocol",
                        {"theta", "gamma", "tau", "tau_J", "fast_pulses",
                         "cycles", "slow_axis", "noise_fraction", "noise_seed",
                         "measure_every"});
    cfg.protocol.base.theta = require<double>(p, "protocol", "theta");
    cfg.protocol.base.gamma = optional_value(p, "protocol", "gamma", 0.0);
    if (p.contains("tau") == p.contains("tau_J"))
      throw ConfigError("config: protocol needs exactly one of tau, tau_J");
    if (p.contains("tau")) {
      cfg.protocol.tau_in_scale_units = false;
      cfg.protocol.tau_value = require<double>(p, "protocol", "tau");
    } else {
      cfg.protocol.tau_in_scale_units = true;
      cfg.protocol.tau_value = require<double>(p, "protocol", "tau_J");
    }
    cfg.protocol.base.fast_pulses = require<long>(p, "protocol", "fast_pulses");
    cfg.protocol.base.cycles = require<long>(p, "protocol", "cycles");
    const std::string axis =
        optional_value<std::string>(p, "protocol", "slow_axis", "y");
    if (axis == "y")
      cfg.protocol.base.slow_axis = SlowAxis::Y;
    else if (axis == "z")
      cfg.protocol.base.slow_axis = SlowAxis::Z;
    else
      throw ConfigError("config: protocol.slow_axis must be \"y\" or \"z\"");
    cfg.protocol.base.noise_fraction =
        optional_value(p, "protocol", "noise_fraction", 0.0);
    cfg.protocol.base.noise_seed =
        require<std::uint64_t>(p, "protocol", "noise_seed");
    const std::string measure = optional_value<std::string>(
        p, "protocol", "measure_every", "floquet_cycle");
    if (measure == "fast_kick")
      cfg.protocol.base.measure_every = MeasureEvery::FastKick;
    else if (measure == "floquet_cycle")
      cfg.protocol.base.measure_every = MeasureEvery::FloquetCycle;
    else
      throw ConfigError(
          "config: protocol.measure_every must be \"fast_kick\" or "
          "\"floquet_cycle\"");
  }

  // hamiltonian
  {
    const std::string h =
        optional_value<std::string>(root, "top level", "hamiltonian", "full");
    if (h == "full")
      cfg.hamiltonian = HamiltonianChoice::FullSystem;
    else if (h == "idealized")
      cfg.hamiltonian = HamiltonianChoice::IdealizedLeading;
    else
      throw ConfigError("config: hamiltonian must be \"full\" or \"idealized\"");
  }

  // sweep
  if (root.contains("sweep")) {
    const json& s = root.at("sweep");
    reject_unknown_keys(s, "sweep",
                        {"gamma", "fast_pulses", "tau", "tau_J", "seeds"});
    if (s.contains("gamma"))
      cfg.sweep.gammas = parse_double_axis(s.at("gamma"), "sweep.gamma");
    if (s.contains("fast_pulses"))
      cfg.sweep.fast_pulses =
          require<std::vector<long>>(s, "sweep", "fast_pulses");
    if (s.contains("tau") && s.contains("tau_J"))
      throw ConfigError("config: sweep needs at most one of tau, tau_J");
    if (s.contains("tau")) {
      cfg.sweep.taus = parse_double_axis(s.at("tau"), "sweep.tau");
      cfg.sweep.taus_in_scale_units = false;
    } else if (s.contains("tau_J")) {
      cfg.sweep.taus = parse_double_axis(s.at("tau_J"), "sweep.tau_J");
      cfg.sweep.taus_in_scale_units = true;
    }
    if (s.contains("seeds"))
      cfg.sweep.seeds = require<std::vector<std::uint64_t>>(s, "sweep", "seeds");
  }

  // analysis
  if (root.contains("analysis")) {
    const json& a = root.at("analysis");
    reject_unknown_keys(a, "analysis",
                        {"heating", "spectrum", "rectify", "rigidity_threshold",
                         "branch_center"});
    cfg.analysis.heating = optional_value(a, "analysis", "heating", true);
    cfg.analysis.spectrum = optional_value(a, "analysis", "spectrum", true);
    const std::string rect =
        optional_value<std::string>(a, "analysis", "rectify", "absolute");
    if (rect == "absolute")
      cfg.analysis.rectify = Rectify::Absolute;
    else if (rect == "none")
      cfg.analysis.rectify = Rectify::None;
    else
      throw ConfigError("config: analysis.rectify must be \"absolute\" or \"none\"");
    cfg.analysis.rigidity_threshold =
        optional_value(a, "analysis", "rigidity_threshold", 0.2);
    if (a.contains("branch_center"))
      cfg.analysis.branch_center = a.at("branch_center").get<double>();
  }

  cfg.workers = optional_value(root, "top level", "workers", 0);
  cfg.output_dir =
      optional_value<std::string>(root, "top level", "output", "out");

  cfg.echo = root.dump(2);
  try {
    cfg.protocol.base.tau = 1.0;  // placeholder for validation only
    cfg.protocol.base.validate();
    cfg.protocol.base.tau = 0.0;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(cfg.protocol.tau_value > 0.0))
    throw ConfigError("config: tau must be > 0");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

namespace {

struct GraphBundle {
  SpinGraph graph;
  CouplingSet couplings;
  double coupling_scale = 0.0;  // J, 0 when not needed
};

struct Cell {
  std::size_t index = 0;
  std::uint64_t seed = 0;  // seed-axis value (0 + use_base flag => config seeds)
  bool use_base_seeds = true;
  long fast_pulses = 1;
  double tau_value = 0.0;  // in J units or absolute per config
  double gamma = 0.0;
  // results
  std::string error;
  std::string file;
  double tau_abs = 0.0;
  std::optional<Lifetime> lifetime;
  std::vector<double> cycle_abs_x;
  std::vector<double> cycle_value;  // analysis observable (mean when available)
  double spectrum_pi_peak = 0.0;
  std::vector<double> spectrum_magnitude;
  double period = 0.0;
};

}  // namespace

TimeSeries read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_series_csv: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "# spinkick series v1")
    throw std::runtime_error("read_series_csv: unrecognized format");

  TimeSeries series;
  std::map<std::string, std::string> meta;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      std::istringstream ls(line.substr(2));
      std::string token;
      while (ls >> token) {
        const auto eq = token.find('=');
        if (eq != std::string::npos)
          meta[token.substr(0, eq)] = token.substr(eq + 1);
      }
    } else {
      break;  // column header line
    }
  }
  auto meta_d = [&](const char* key) { return std::stod(meta.at(key)); };
  series.site_count = static_cast<int>(meta_d("sites"));
  series.graph_seed = std::stoull(meta.at("graph_seed"));
  series.coupling_scale = meta_d("coupling_scale");
  series.hamiltonian = meta.at("hamiltonian") == "full"
                           ? HamiltonianChoice::FullSystem
                           : HamiltonianChoice::IdealizedLeading;
  series.protocol.theta = meta_d("theta");
  series.protocol.gamma = meta_d("gamma");
  series.protocol.tau = meta_d("tau");
  series.protocol.fast_pulses = std::stol(meta.at("fast_pulses"));
  series.protocol.cycles = std::stol(meta.at("cycles"));
  series.protocol.slow_axis = meta.at("slow_axis") == "y" ? SlowAxis::Y : SlowAxis::Z;
  series.protocol.noise_fraction = meta_d("noise_fraction");
  series.protocol.noise_seed = std::stoull(meta.at("noise_seed"));
  series.protocol.measure_every = meta.at("measure_every") == "fast_kick"
                                      ? MeasureEvery::FastKick
                                      : MeasureEvery::FloquetCycle;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TimeRecord r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    if (ls >> r.kick_index >> r.cycle_index >> r.time >> r.x >> r.y >> r.z >>
        r.norm)
      series.records.push_back(r);
  }
  return series;
}

namespace {

void write_fits_manifest(std::ostream& out, const RunConfig& cfg,
                         const std::vector<Cell>& cells,
                         std::uint64_t provenance) {
  out << "# spinkick fits v1\n";
  out << "code_version = " << kVersion << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(provenance));
  out << "provenance_hash = " << buf << "\n";

  if (!cfg.analysis.branch_center.has_value()) return;
  const double center = *cfg.analysis.branch_center;
  out << "branch_center = " << format_double(center) << "\n";

  // group cells by (fast_pulses, tau_value); average lifetimes over seeds
  std::map<std::pair<long, double>, std::map<double, std::vector<double>>> groups;
  for (const auto& cell : cells) {
    if (!cell.error.empty() || !cell.lifetime) continue;
    const double eps = std::fabs(cell.gamma - center);
    if (eps < 1e-12) continue;
    groups[{cell.fast_pulses, cell.tau_value}][eps].push_back(
        cell.lifetime->kicks);
  }
  for (const auto& [key, by_eps] : groups) {
    std::vector<double> eps, lifetimes;
    for (const auto& [e, lives] : by_eps) {
      double mean = 0.0;
      for (double v : lives) mean += v;
      eps.push_back(e);
      lifetimes.push_back(mean / static_cast<double>(lives.size()));
    }
    out << "[fit N=" << key.first << " tau=" << format_double(key.second)
        << "]\n";
    out << "points = " << eps.size() << "\n";
    if (eps.size() < 4) {
      out << "status = insufficient_points\n";
      continue;
    }
    try {
      const HeatingFit fit = fit_combined_heating(eps, lifetimes, key.first);
      out << "status = ok\n";
      out << "g = " << format_double(fit.g) << "\n";
      out << "lambda = " << format_double(fit.lambda) << "\n";
      out << "gamma_min = " << format_double(fit.gamma_min) << "\n";
      out << "residual_norm = " << format_double(fit.residual_norm) << "\n";
    } catch (const std::exception& e) {
      out << "status = error:" << e.what() << "\n";
    }
  }
}

}  // namespace

ExecutionResult execute(const RunConfig& config,
                        const std::optional<std::filesystem::path>& out_override,
                        std::optional<int> workers_override,
                        std::optional<std::uint64_t> seed_override) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = config;
  if (seed_override) {
    cfg.graph.seed = *seed_override;
    if (cfg.disorder) cfg.disorder->seed = derive_seed(*seed_override, 5);
    cfg.protocol.base.noise_seed = derive_seed(*seed_override, 6);
  }

  int workers = workers_override.value_or(cfg.workers);
  if (workers <= 0)
    workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  const std::filesystem::path out_dir =
      out_override.value_or(std::filesystem::path(cfg.output_dir));
  std::filesystem::create_directories(out_dir / "cells");

  // seed axis
  std::vector<std::pair<std::uint64_t, bool>> seed_axis;  // (value, use_base)
  if (cfg.sweep.seeds.empty()) {
    seed_axis.push_back({0, true});
  } else {
    if (!cfg.graph.file.empty())
      throw ConfigError("config: seed sweep cannot be combined with graph.file");
    for (std::uint64_t s : cfg.sweep.seeds) seed_axis.push_back({s, false});
  }

  const bool need_scale =
      cfg.protocol.tau_in_scale_units ||
      (!cfg.sweep.taus.empty() && cfg.sweep.taus_in_scale_units);

  // prepare one graph bundle per seed-axis entry (keyed by index)
  std::vector<GraphBundle> bundles(seed_axis.size());
  for (std::size_t i = 0; i < seed_axis.size(); ++i) {
    GraphBundle& bundle = bundles[i];
    if (!cfg.graph.file.empty()) {
      auto [graph, couplings] = load_graph(cfg.graph.file);
      bundle.graph = std::move(graph);
      bundle.couplings = std::move(couplings);
    } else {
      const std::uint64_t graph_seed =
          seed_axis[i].second ? cfg.graph.seed : seed_axis[i].first;
      bundle.graph = generate_graph(cfg.graph.count, cfg.graph.r_min,
                                    cfg.graph.r_max, graph_seed,
                                    cfg.graph.options);
      bundle.couplings = compute_couplings(bundle.graph);
      if (cfg.disorder) {
        const std::uint64_t dseed = seed_axis[i].second
                                        ? cfg.disorder->seed
                                        : derive_seed(seed_axis[i].first, 5);
        const double mean = cfg.disorder->absolute
                                ? cfg.disorder->mean
                                : cfg.disorder->mean_factor * bundle.couplings.median_b;
        const double sigma =
            cfg.disorder->absolute
                ? cfg.disorder->sigma
                : cfg.disorder->sigma_factor * bundle.couplings.median_b;
        bundle.couplings = sample_disorder(bundle.couplings, mean, sigma, dseed);
      }
    }
    if (need_scale) {
      const double b = bundle.couplings.median_b;
      if (!(b > 0.0))
        throw ConfigError("config: tau_J needs a graph with nonzero couplings");
      bundle.coupling_scale = estimate_coupling_scale(
          bundle.couplings, cfg.scale.dt_factor / b, cfg.scale.t_max_factor / b);
    }
    char name[64];
    std::snprintf(name, sizeof(name), "graph_%02zu.txt", i);
    save_graph(bundle.graph, bundle.couplings, out_dir / name);
  }

  // cell list: seed x N x tau x gamma (gamma innermost)
  std::vector<long> n_axis = cfg.sweep.fast_pulses;
  if (n_axis.empty()) n_axis.push_back(cfg.protocol.base.fast_pulses);
  std::vector<double> tau_axis = cfg.sweep.taus;
  bool tau_axis_in_scale = cfg.sweep.taus_in_scale_units;
  if (tau_axis.empty()) {
    tau_axis.push_back(cfg.protocol.tau_value);
    tau_axis_in_scale = cfg.protocol.tau_in_scale_units;
  }
  std::vector<double> gamma_axis = cfg.sweep.gammas;
  if (gamma_axis.empty()) gamma_axis.push_back(cfg.protocol.base.gamma);

  std::vector<Cell> cells;
  for (std::size_t si = 0; si < seed_axis.size(); ++si)
    for (long n : n_axis)
      for (double tau : tau_axis)
        for (double gamma : gamma_axis) {
          Cell cell;
          cell.index = cells.size();
          cell.seed = seed_axis[si].first;
          cell.use_base_seeds = seed_axis[si].second;
          cell.fast_pulses = n;
          cell.tau_value = tau;
          cell.gamma = gamma;
          cells.push_back(cell);
        }

  auto bundle_for = [&](const Cell& cell) -> const GraphBundle& {
    for (std::size_t i = 0; i < seed_axis.size(); ++i)
      if (seed_axis[i].first == cell.seed &&
          seed_axis[i].second == cell.use_base_seeds)
        return bundles[i];
    return bundles[0];
  };

  auto run_cell = [&](Cell& cell) {
    try {
      const GraphBundle& bundle = bundle_for(cell);
      DriveProtocol protocol = cfg.protocol.base;
      protocol.gamma = cell.gamma;
      protocol.fast_pulses = cell.fast_pulses;
      protocol.tau = tau_axis_in_scale
                         ? cell.tau_value / bundle.coupling_scale
                         : cell.tau_value;
      if (!cell.use_base_seeds)
        protocol.noise_seed = derive_seed(cell.seed, 6);
      cell.tau_abs = protocol.tau;

      TimeSeries series =
          run_protocol(bundle.couplings, protocol, cfg.hamiltonian);
      series.graph_seed = bundle.graph.seed;
      series.coupling_scale = bundle.coupling_scale;

      char name[64];
      std::snprintf(name, sizeof(name), "cell_%05zu.csv", cell.index);
      cell.file = std::string("cells/") + name;
      std::ofstream out(out_dir / "cells" / name);
      series.write_csv(out);

      const CycleSeries pre =
          cycle_series(series, CycleObservable::PreKickSample);
      cell.period = pre.period;
      cell.cycle_abs_x.resize(pre.value.size());
      for (std::size_t k = 0; k < pre.value.size(); ++k)
        cell.cycle_abs_x[k] = std::fabs(pre.value[k]);
      if (cfg.analysis.heating)
        cell.lifetime = heating_time(pre, std::exp(-1.0), cfg.analysis.rectify);
      if (cfg.analysis.spectrum) {
        const bool have_fast =
            protocol.measure_every == MeasureEvery::FastKick;
        const CycleSeries observable =
            have_fast ? cycle_series(series, CycleObservable::CycleMean) : pre;
        cell.cycle_value = observable.value;
        const Spectrum spectrum =
            stroboscopic_spectrum(observable.value, observable.period);
        cell.spectrum_pi_peak = spectrum.subharmonic_peak();
        cell.spectrum_magnitude = spectrum.magnitude();
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  if (workers == 1 || cells.size() <= 1) {
    for (auto& cell : cells) run_cell(cell);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w]() {
        for (std::size_t i = w; i < cells.size();
             i += static_cast<std::size_t>(workers))
          run_cell(cells[i]);
      });
    for (auto& t : pool) t.join();
  }

  // grid outputs per (seed, N, tau) combo when gamma was swept
  if (gamma_axis.size() > 1) {
    std::size_t combo = 0;
    for (std::size_t base = 0; base < cells.size();
         base += gamma_axis.size(), ++combo) {
      char prefix[64];
      std::snprintf(prefix, sizeof(prefix), "grid_%03zu", combo);
      {
        std::ofstream out(out_dir / (std::string(prefix) + "_heatmap.csv"));
        out << "cycle";
        for (std::size_t g = 0; g < gamma_axis.size(); ++g)
          out << "," << format_double(cells[base + g].gamma);
        out << "\n";
        for (long m = 0; m < cfg.protocol.base.cycles; ++m) {
          out << (m + 1);
          for (std::size_t g = 0; g < gamma_axis.size(); ++g) {
            const auto& v = cells[base + g].cycle_abs_x;
            out << ",";
            if (static_cast<std::size_t>(m) < v.size())
              out << format_double(v[m]);
            else
              out << "nan";
          }
          out << "\n";
        }
      }
      if (cfg.analysis.spectrum) {
        std::ofstream out(out_dir / (std::string(prefix) + "_spectra.csv"));
        out << "bin";
        for (std::size_t g = 0; g < gamma_axis.size(); ++g)
          out << "," << format_double(cells[base + g].gamma);
        out << "\n";
        std::size_t bins = 0;
        for (std::size_t g = 0; g < gamma_axis.size(); ++g)
          bins = std::max(bins, cells[base + g].spectrum_magnitude.size());
        for (std::size_t k = 0; k < bins; ++k) {
          out << k;
          for (std::size_t g = 0; g < gamma_axis.size(); ++g) {
            const auto& v = cells[base + g].spectrum_magnitude;
            out << ",";
            if (k < v.size())
              out << format_double(v[k]);
            else
              out << "nan";
          }
          out << "\n";
        }
      }
      {
        std::ofstream out(out_dir / (std::string(prefix) + "_lifetimes.csv"));
        out << "gamma,lifetime_cycles,lifetime_kicks,lifetime_time,pi_peak,status\n";
        for (std::size_t g = 0; g < gamma_axis.size(); ++g) {
          const Cell& cell = cells[base + g];
          out << format_double(cell.gamma) << ",";
          if (!cell.error.empty())
            out << "nan,nan,nan,nan,error\n";
          else if (!cell.lifetime)
            out << "nan,nan,nan," << format_double(cell.spectrum_pi_peak)
                << ",threshold_not_reached\n";
          else
            out << format_double(cell.lifetime->cycles) << ","
                << format_double(cell.lifetime->kicks) << ","
                << format_double(cell.lifetime->time) << ","
                << format_double(cell.spectrum_pi_peak) << ",ok\n";
        }
      }
    }
  }

  const std::uint64_t provenance = fnv1a(cfg.echo);
  if (cfg.analysis.heating) {
    std::ofstream out(out_dir / "fits.txt");
    write_fits_manifest(out, cfg, cells, provenance);
  }

  int failed = 0;
  for (const auto& cell : cells)
    if (!cell.error.empty()) ++failed;

  {
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    std::ofstream out(out_dir / "manifest.txt");
    out << "# spinkick run manifest v1\n";
    out << "code_version = " << kVersion << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(provenance));
    out << "provenance_hash = " << buf << "\n";
    out << "workers = " << workers << "\n";
    out << "wall_time_seconds = " << format_double(elapsed) << "\n";
    out << "cells = " << cells.size() << "\n";
    out << "failed_cells = " << failed << "\n";
    for (const auto& cell : cells) {
      out << "cell " << cell.index << " seed=" << cell.seed
          << " N=" << cell.fast_pulses << " tau=" << format_double(cell.tau_abs)
          << " gamma=" << format_double(cell.gamma) << " status="
          << (cell.error.empty() ? "ok" : std::string("error:") + cell.error)
          << " file=" << cell.file << "\n";
    }
    out << "config_echo_begin\n" << cfg.echo << "\nconfig_echo_end\n";
  }

  return {static_cast<int>(cells.size()), failed, out_dir};
}

int analyze_directory(const std::filesystem::path& dir,
                      const AnalysisSpec& analysis) {
  const std::filesystem::path cells_dir = dir / "cells";
  if (!std::filesystem::exists(cells_dir))
    throw std::runtime_error("analyze: no cells/ under " + dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(cells_dir))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::ofstream out(dir / "analysis.txt");
  out << "# spinkick analysis v1\n";
  out << "code_version = " << kVersion << "\n";

  std::map<long, std::map<double, std::vector<double>>> branch_data;
  for (const auto& file : files) {
    const TimeSeries series = read_series_csv(file);
    const CycleSeries pre = cycle_series(series, CycleObservable::PreKickSample);
    const auto life = heating_time(pre, std::exp(-1.0), analysis.rectify);
    out << "[" << file.filename().string() << "]\n";
    out << "gamma = " << format_double(series.protocol.gamma) << "\n";
    if (life) {
      out << "lifetime_cycles = " << format_double(life->cycles) << "\n";
      out << "lifetime_kicks = " << format_double(life->kicks) << "\n";
      out << "lifetime_time = " << format_double(life->time) << "\n";
    } else {
      out << "lifetime = threshold_not_reached\n";
    }
    if (analysis.spectrum) {
      const bool have_fast =
          series.protocol.measure_every == MeasureEvery::FastKick;
      const CycleSeries observable =
          have_fast ? cycle_series(series, CycleObservable::CycleMean) : pre;
      const Spectrum spectrum =
          stroboscopic_spectrum(observable.value, observable.period);
      out << "pi_peak = " << format_double(spectrum.subharmonic_peak()) << "\n";
      out << "zero_peak = " << format_double(spectrum.zero_frequency_peak())
          << "\n";
    }
    if (analysis.branch_center && life) {
      const double eps = std::fabs(series.protocol.gamma - *analysis.branch_center);
      if (eps > 1e-12)
        branch_data[series.protocol.fast_pulses][eps].push_back(life->kicks);
    }
  }

  if (analysis.branch_center) {
    for (const auto& [n, by_eps] : branch_data) {
      std::vector<double> eps, lives;
      for (const auto& [e, v] : by_eps) {
        double mean = 0.0;
        for (double x : v) mean += x;
        eps.push_back(e);
        lives.push_back(mean / static_cast<double>(v.size()));
      }
      out << "[branch N=" << n << "]\n";
      if (eps.size() >= 4) {
        const HeatingFit fit = fit_combined_heating(eps, lives, n);
        out << "g = " << format_double(fit.g) << "\n";
        out << "lambda = " << format_double(fit.lambda) << "\n";
        out << "gamma_min = " << format_double(fit.gamma_min) << "\n";
      } else {
        out << "status = insufficient_points\n";
      }
    }
  }
  return 0;
}

}  // namespace spinkick
