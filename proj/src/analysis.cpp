#include "spinkick/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace spinkick {

namespace {

constexpr double kPi = std::numbers::pi;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double pick_axis(const TimeRecord& r, Axis axis) {
  switch (axis) {
    case Axis::X: return r.x;
    case Axis::Y: return r.y;
    case Axis::Z: return r.z;
  }
  return 0.0;
}

}  // namespace

CycleSeries cycle_series(const TimeSeries& series, CycleObservable observable,
                         Axis axis) {
  CycleSeries out;
  out.fast_pulses = series.protocol.fast_pulses;
  out.period = static_cast<double>(series.protocol.fast_pulses) * series.protocol.tau;

  if (series.protocol.measure_every == MeasureEvery::FloquetCycle) {
    if (observable == CycleObservable::CycleMean)
      throw std::invalid_argument(
          "cycle_series: cycle means need fast-kick resolution");
    for (const auto& r : series.records) {
      out.kick_index.push_back(static_cast<double>(r.kick_index));
      out.time.push_back(r.time);
      out.value.push_back(pick_axis(r, axis));
    }
    return out;
  }

  // fast-kick resolution: within each cycle the fast samples come first and
  // the post-slow-kick sample is last, so the pre-kick sample is the
  // second-to-last record and the cycle mean runs over everything but the
  // last record.
  std::vector<const TimeRecord*> group;
  auto flush = [&]() {
    if (group.size() < 2) return;
    const TimeRecord* pre_kick = group[group.size() - 2];
    out.kick_index.push_back(static_cast<double>(pre_kick->kick_index));
    out.time.push_back(pre_kick->time);
    if (observable == CycleObservable::CycleMean) {
      double sum = 0.0;
      for (std::size_t i = 0; i + 1 < group.size(); ++i)
        sum += pick_axis(*group[i], axis);
      out.value.push_back(sum / static_cast<double>(group.size() - 1));
    } else {
      out.value.push_back(pick_axis(*pre_kick, axis));
    }
  };
  long cycle = 0;
  for (const auto& r : series.records) {
    if (r.cycle_index != cycle) {
      flush();
      group.clear();
      cycle = r.cycle_index;
    }
    group.push_back(&r);
  }
  flush();
  return out;
}

std::optional<Lifetime> heating_time(const CycleSeries& series, double threshold,
                                     Rectify rectify) {
  if (series.value.empty()) return std::nullopt;
  auto value_at = [&](std::size_t i) {
    return rectify == Rectify::Absolute ? std::fabs(series.value[i])
                                        : series.value[i];
  };
  const double initial = value_at(0);
  const double level = threshold * std::fabs(initial);
  double prev = value_at(0);
  if (prev < level) return Lifetime{series.kick_index[0], series.time[0], 1.0};
  for (std::size_t i = 1; i < series.value.size(); ++i) {
    const double cur = value_at(i);
    if (cur < level) {
      const double frac = (prev - level) / (prev - cur);
      Lifetime life;
      life.kicks = series.kick_index[i - 1] +
                   frac * (series.kick_index[i] - series.kick_index[i - 1]);
      life.time = series.time[i - 1] + frac * (series.time[i] - series.time[i - 1]);
      life.cycles = static_cast<double>(i) + frac;  // crossing between sample i-1 and i
      return life;
    }
    prev = cur;
  }
  return std::nullopt;  // threshold not reached
}

namespace {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
  double slope_err = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.slope * x[i] - fit.intercept;
    fit.sse += r * r;
  }
  if (n > 2) fit.slope_err = std::sqrt(fit.sse / static_cast<double>(n - 2) / sxx);
  return fit;
}

}  // namespace

HeatingFit fit_combined_heating(std::span<const double> eps,
                                std::span<const double> lifetime_kicks,
                                long fast_pulses) {
  if (eps.size() != lifetime_kicks.size())
    throw std::invalid_argument("fit_combined_heating: size mismatch");
  if (eps.size() < 4)
    throw std::invalid_argument("fit_combined_heating: need >= 4 points");
  std::vector<double> log_eps(eps.size());
  std::vector<double> rates(eps.size());
  double min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0))
      throw std::invalid_argument("fit_combined_heating: eps must be > 0");
    if (!(lifetime_kicks[i] > 0.0))
      throw std::invalid_argument("fit_combined_heating: lifetimes must be > 0");
    log_eps[i] = std::log(eps[i]);
    rates[i] = 1.0 / lifetime_kicks[i];
    min_rate = std::min(min_rate, rates[i]);
  }
  const double spread =
      *std::max_element(log_eps.begin(), log_eps.end()) -
      *std::min_element(log_eps.begin(), log_eps.end());
  if (spread < 1e-12)
    throw std::invalid_argument("fit_combined_heating: degenerate eps values");

  // Gamma_min profiled over [0, min Gamma): grid scan, then ternary refine.
  const double upper = min_rate * (1.0 - 1e-12);
  std::vector<double> logy(eps.size());
  auto objective = [&](double gmin) {
    for (std::size_t i = 0; i < rates.size(); ++i)
      logy[i] = std::log(rates[i] - gmin);
    return linear_fit(log_eps, logy).sse;
  };

  const int grid = 400;
  double best_g = 0.0;
  double best_sse = objective(0.0);
  for (int k = 1; k <= grid; ++k) {
    const double g = upper * k / static_cast<double>(grid + 1);
    const double sse = objective(g);
    if (sse < best_sse) {
      best_sse = sse;
      best_g = g;
    }
  }
  double lo = std::max(0.0, best_g - upper / (grid + 1));
  double hi = std::min(upper, best_g + upper / (grid + 1));
  for (int it = 0; it < 200; ++it) {
    const double g1 = lo + (hi - lo) / 3.0;
    const double g2 = hi - (hi - lo) / 3.0;
    if (objective(g1) <= objective(g2))
      hi = g2;
    else
      lo = g1;
  }
  const double gamma_min = 0.5 * (lo + hi);

  for (std::size_t i = 0; i < rates.size(); ++i)
    logy[i] = std::log(rates[i] - gamma_min);
  const LinearFit fit = linear_fit(log_eps, logy);

  HeatingFit out;
  out.lambda = fit.slope;
  out.g = static_cast<double>(fast_pulses) * std::exp(fit.intercept);
  out.gamma_min = gamma_min;
  out.residual_norm = std::sqrt(fit.sse);
  out.fast_pulses = fast_pulses;
  return out;
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_power_law: need >= 2 matching points");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("fit_power_law: data must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const LinearFit fit = linear_fit(lx, ly);
  return {fit.slope, fit.slope_err, fit.intercept};
}

std::vector<double> Spectrum::magnitude() const {
  std::vector<double> out(amplitude.size());
  for (std::size_t i = 0; i < amplitude.size(); ++i) out[i] = std::abs(amplitude[i]);
  return out;
}

double Spectrum::subharmonic_peak() const {
  // bin closest to omega = pi/T, i.e. k = M/2
  const std::size_t k = amplitude.size() / 2;
  return std::abs(amplitude[k]);
}

double Spectrum::zero_frequency_peak() const { return std::abs(amplitude[0]); }

Spectrum stroboscopic_spectrum(std::span<const double> values, double period) {
  if (values.size() < 2)
    throw std::invalid_argument("stroboscopic_spectrum: need >= 2 cycle records");
  const std::size_t m = values.size();
  Spectrum out;
  out.period = period;
  out.omega.resize(m);
  out.amplitude.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    out.omega[k] = 2.0 * kPi * static_cast<double>(k) /
                   (static_cast<double>(m) * period);
    cplx sum(0.0, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double phase = -2.0 * kPi * static_cast<double>(k) *
                           static_cast<double>(j) / static_cast<double>(m);
      sum += values[j] * cplx(std::cos(phase), std::sin(phase));
    }
    out.amplitude[k] = sum;
  }
  return out;
}

double rigidity_extent(std::span<const double> gammas,
                       std::span<const double> peak_magnitudes, double threshold,
                       double center) {
  if (gammas.size() != peak_magnitudes.size() || gammas.size() < 2)
    throw std::invalid_argument("rigidity_extent: need a gamma grid");
  double peak_max = 0.0;
  for (double p : peak_magnitudes) peak_max = std::max(peak_max, p);
  if (peak_max <= 0.0) return 0.0;
  const double level = threshold * peak_max;

  // grid point closest to the center
  std::size_t c = 0;
  for (std::size_t i = 1; i < gammas.size(); ++i)
    if (std::fabs(gammas[i] - center) < std::fabs(gammas[c] - center)) c = i;
  if (peak_magnitudes[c] < level) return 0.0;  // peak absent at the center

  std::size_t left = c;
  while (left > 0 && peak_magnitudes[left - 1] >= level) --left;
  std::size_t right = c;
  while (right + 1 < gammas.size() && peak_magnitudes[right + 1] >= level) ++right;

  double gamma_left = gammas[left];
  if (left > 0) {
    const double frac = (peak_magnitudes[left] - level) /
                        (peak_magnitudes[left] - peak_magnitudes[left - 1]);
    gamma_left = gammas[left] + frac * (gammas[left - 1] - gammas[left]);
  }
  double gamma_right = gammas[right];
  if (right + 1 < gammas.size()) {
    const double frac = (peak_magnitudes[right] - level) /
                        (peak_magnitudes[right] - peak_magnitudes[right + 1]);
    gamma_right = gammas[right] + frac * (gammas[right + 1] - gammas[right]);
  }
  return 0.5 * (gamma_right - gamma_left);
}

std::optional<double> phase_estimate(double x, double y) {
  if (std::fabs(x) < 1e-12 && std::fabs(y) < 1e-12) return std::nullopt;
  double phi = std::atan2(y, x);
  if (phi <= -kPi) phi = kPi;  // (-pi, pi]
  return phi;
}

// -- gamma sweeps ----------------------------------------------------------

PhaseDiagram phase_diagram(const CouplingSet& couplings,
                           const DriveProtocol& protocol_template,
                           std::span<const double> gammas,
                           HamiltonianChoice choice, int workers) {
  PhaseDiagram diagram;
  diagram.cycles = protocol_template.cycles;
  diagram.fast_pulses = protocol_template.fast_pulses;
  diagram.cells.resize(gammas.size());

  if (workers < 1) workers = 1;
  auto run_cell = [&](std::size_t i) {
    PhaseCell& cell = diagram.cells[i];
    cell.gamma = gammas[i];
    try {
      DriveProtocol protocol = protocol_template;
      protocol.gamma = gammas[i];
      protocol.measure_every = MeasureEvery::FastKick;  // cycle means needed
      const TimeSeries series = run_protocol(couplings, protocol, choice);
      const CycleSeries pre = cycle_series(series, CycleObservable::PreKickSample);
      const CycleSeries mean = cycle_series(series, CycleObservable::CycleMean);
      cell.cycle_abs_x.resize(pre.value.size());
      for (std::size_t k = 0; k < pre.value.size(); ++k)
        cell.cycle_abs_x[k] = std::fabs(pre.value[k]);
      cell.cycle_mean_x = mean.value;
      cell.spectrum = stroboscopic_spectrum(mean.value, mean.period);
      cell.lifetime = heating_time(pre, std::exp(-1.0), Rectify::Absolute);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  if (workers == 1 || gammas.size() <= 1) {
    for (std::size_t i = 0; i < gammas.size(); ++i) run_cell(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t i = w; i < diagram.cells.size();
             i += static_cast<std::size_t>(workers))
          run_cell(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  return diagram;
}

void PhaseDiagram::write_heatmap_csv(std::ostream& out) const {
  out << "cycle";
  for (const auto& cell : cells) out << "," << format_double(cell.gamma);
  out << "\n";
  for (long m = 0; m < cycles; ++m) {
    out << (m + 1);
    for (const auto& cell : cells) {
      out << ",";
      if (static_cast<std::size_t>(m) < cell.cycle_abs_x.size())
        out << format_double(cell.cycle_abs_x[m]);
      else
        out << "nan";
    }
    out << "\n";
  }
}

void PhaseDiagram::write_spectra_csv(std::ostream& out) const {
  out << "omega";
  for (const auto& cell : cells) out << "," << format_double(cell.gamma);
  out << "\n";
  for (long k = 0; k < cycles; ++k) {
    bool have_any = false;
    for (const auto& cell : cells)
      if (static_cast<std::size_t>(k) < cell.spectrum.amplitude.size())
        have_any = true;
    if (!have_any) break;
    bool wrote_omega = false;
    std::string row;
    for (const auto& cell : cells) {
      if (!wrote_omega && static_cast<std::size_t>(k) < cell.spectrum.omega.size()) {
        row = format_double(cell.spectrum.omega[k]);
        wrote_omega = true;
      }
    }
    out << row;
    for (const auto& cell : cells) {
      out << ",";
      if (static_cast<std::size_t>(k) < cell.spectrum.amplitude.size())
        out << format_double(std::abs(cell.spectrum.amplitude[k]));
      else
        out << "nan";
    }
    out << "\n";
  }
}

void PhaseDiagram::write_lifetimes_csv(std::ostream& out) const {
  out << "gamma,lifetime_cycles,lifetime_kicks,lifetime_time,status\n";
  for (const auto& cell : cells) {
    out << format_double(cell.gamma) << ",";
    if (!cell.error.empty()) {
      out << "nan,nan,nan,error:" << cell.error << "\n";
    } else if (!cell.lifetime) {
      out << "nan,nan,nan,threshold_not_reached\n";
    } else {
      out << format_double(cell.lifetime->cycles) << ","
          << format_double(cell.lifetime->kicks) << ","
          << format_double(cell.lifetime->time) << ",ok\n";
    }
  }
}

}  // namespace spinkick
