#pragma once

// Run-level analysis: relative entropy and L1 distance to the steady state,
// exponential decay fits, the Csiszar-Kullback rate ratio and the plateau
// detector for runs with a vanishing solvent fraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepnp/core_model.hpp"
#include "sepnp/discretization.hpp"
#include "sepnp/errors.hpp"
#include "sepnp/scenario.hpp"
#include "sepnp/solver.hpp"

namespace sepnp {

struct FitWindow {
  std::size_t begin = 0;  // first index
  std::size_t end = 0;    // one past the last index

  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
};

struct DecayFit {
  FitWindow window;
  double rate = 0.0;           // decay constant per unit time (positive when decaying)
  double rate_per_step = 0.0;  // rate times the mean sample spacing
  double intercept = 0.0;      // of log(series) at t = 0
  double r_squared = 0.0;
};

// Least-squares line through (t, log series) on the window; rate = -slope.
inline DecayFit fit_decay_rate(std::span<const double> series, std::span<const double> times, FitWindow window) {
  if (series.size() != times.size()) throw DimensionError("series and time axis differ in length");
  if (window.end > series.size() || window.size() < 5) throw FitError("fit window needs at least 5 points");
  const double n = static_cast<double>(window.size());
  double st = 0.0, sy = 0.0;
  for (std::size_t k = window.begin; k < window.end; ++k) {
    if (!(series[k] > 0.0) || !std::isfinite(series[k]))
      throw FitError("series is not strictly positive at index " + std::to_string(k));
    st += times[k];
    sy += std::log(series[k]);
  }
  const double tm = st / n;
  const double ym = sy / n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t k = window.begin; k < window.end; ++k) {
    const double dt = times[k] - tm;
    const double dy = std::log(series[k]) - ym;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0.0)) throw FitError("time axis is degenerate on the fit window");
  const double slope = sty / stt;
  DecayFit fit;
  fit.window = window;
  fit.rate = -slope;
  fit.intercept = ym - slope * tm;
  const double ss_res = std::max(0.0, syy - slope * sty);
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  const double spacing = (times[window.end - 1] - times[window.begin]) / (n - 1.0);
  fit.rate_per_step = fit.rate * spacing;
  return fit;
}

// Last 60% of the steps, excluding the final 5%.
inline FitWindow default_decay_window(std::size_t n_steps) {
  const auto begin = static_cast<std::size_t>(std::floor(0.4 * static_cast<double>(n_steps)));
  const auto tail = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n_steps)));
  return {begin, n_steps > tail ? n_steps - tail : 0};
}

// Ratio of the entropy decay rate to the L1 decay rate; about 2 when the
// Csiszar-Kullback inequality is sharp.
inline double ck_ratio(const DecayFit& entropy, const DecayFit& l1) {
  const std::size_t lo = std::max(entropy.window.begin, l1.window.begin);
  const std::size_t hi = std::min(entropy.window.end, l1.window.end);
  if (hi <= lo || hi - lo < 5) throw FitError("entropy and L1 fits do not share a window");
  if (!(l1.rate > 0.0) || !(entropy.rate > 0.0)) throw FitError("decay fits must have positive rates");
  return entropy.rate / l1.rate;
}

struct PlateauReport {
  bool detected = false;
  FitWindow plateau;
  FitWindow late;
  double plateau_rate = 0.0;
  double late_rate = 0.0;
  std::size_t split = 0;  // first index of the late regime
  double ratio() const { return plateau_rate > 0.0 ? late_rate / plateau_rate : std::numeric_limits<double>::infinity(); }
};

namespace detail {

struct PrefixSums {
  std::vector<double> t, tt, y, yy, ty;

  PrefixSums(std::span<const double> ts, std::span<const double> ys)
      : t(ts.size() + 1, 0.0), tt(t), y(t), yy(t), ty(t) {
    for (std::size_t k = 0; k < ts.size(); ++k) {
      t[k + 1] = t[k] + ts[k];
      tt[k + 1] = tt[k] + ts[k] * ts[k];
      y[k + 1] = y[k] + ys[k];
      yy[k + 1] = yy[k] + ys[k] * ys[k];
      ty[k + 1] = ty[k] + ts[k] * ys[k];
    }
  }

  // Residual sum of squares of the least-squares line on [a, b).
  double sse(std::size_t a, std::size_t b) const {
    const double n = static_cast<double>(b - a);
    const double st = t[b] - t[a], stt = tt[b] - tt[a];
    const double sy = y[b] - y[a], syy = yy[b] - yy[a], sty = ty[b] - ty[a];
    const double vt = stt - st * st / n;
    const double vy = syy - sy * sy / n;
    const double cty = sty - st * sy / n;
    return vt > 0.0 ? std::max(0.0, vy - cty * cty / vt) : std::max(0.0, vy);
  }
};

}  // namespace detail

// Splits log(series) into at most three linear regimes (initial transient,
// plateau, late decay) by minimizing the piecewise least-squares residual; the
// split between the slowest non-final regime and the final one marks the kink
// of the log-series. The final 5% of the samples (where the series is measured
// against its own end state) and nonpositive values are ignored. A plateau is
// reported when the slow regime decays at most a tenth as fast as the final one.
inline PlateauReport plateau_detector(std::span<const double> series, std::span<const double> times) {
  if (series.size() != times.size()) throw DimensionError("series and time axis differ in length");
  PlateauReport report;
  std::size_t usable = series.size() - static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(series.size())));
  while (usable > 0 && !(series[usable - 1] > 0.0)) --usable;
  for (std::size_t k = 0; k < usable; ++k)
    if (!(series[k] > 0.0)) usable = k;

  constexpr std::size_t kMaxSamples = 300;
  constexpr std::size_t kMinSegment = 5;
  if (usable < 3 * kMinSegment) return report;
  const std::size_t stride = std::max<std::size_t>(1, (usable + kMaxSamples - 1) / kMaxSamples);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < usable; k += stride) idx.push_back(k);
  if (idx.back() != usable - 1) idx.push_back(usable - 1);
  std::vector<double> ts, ys;
  for (std::size_t k : idx) {
    ts.push_back(times[k]);
    ys.push_back(std::log(series[k]));
  }
  const std::size_t n = idx.size();
  if (n < 3 * kMinSegment) return report;
  const detail::PrefixSums sums(ts, ys);

  // Segments [0,a), [a,b), [b,n); the first may be empty.
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_a = 0, best_b = n / 2;
  for (std::size_t a = 0; a + 2 * kMinSegment <= n; a = (a == 0 ? kMinSegment : a + 1)) {
    const double first = a == 0 ? 0.0 : sums.sse(0, a);
    for (std::size_t b = a + kMinSegment; b + kMinSegment <= n; ++b) {
      const double total = first + sums.sse(a, b) + sums.sse(b, n);
      if (total < best) {
        best = total;
        best_a = a;
        best_b = b;
      }
    }
  }

  auto slope_rate = [&](std::size_t a, std::size_t b) {
    return fit_decay_rate(series, times, FitWindow{idx[a], b == n ? usable : idx[b]}).rate;
  };
  // The late regime starts right after the slow one.
  FitWindow slow{idx[best_a], idx[best_b]};
  FitWindow late{idx[best_b], usable};
  double slow_rate = slope_rate(best_a, best_b);
  if (best_a >= kMinSegment) {
    const double first_rate = slope_rate(0, best_a);
    if (first_rate < slow_rate) {
      slow_rate = first_rate;
      slow = FitWindow{0, idx[best_a]};
      late = FitWindow{idx[best_a], usable};
    }
  }
  report.plateau = slow;
  report.late = late;
  report.plateau_rate = slow_rate;
  report.late_rate = fit_decay_rate(series, times, late).rate;
  report.split = late.begin;
  report.detected = report.late_rate > 0.0 && report.plateau_rate <= report.late_rate / 10.0;
  return report;
}

// ---------------------------------------------------------------------------
// Series over stored states

inline std::vector<double> relative_entropy_series(std::span<const UnknownVector> states, const ReferenceState& steady,
                                                   const ScenarioConfig& scenario) {
  const DiscreteModel model = DiscreteModel::from(scenario);
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& U : states) out.push_back(relative_entropy(U, steady, model, scenario));
  return out;
}

// Per step: L1 distance per species, then the potential.
inline std::vector<std::vector<double>> l1_error_series(std::span<const UnknownVector> states,
                                                        const ReferenceState& steady, const ScenarioConfig& scenario,
                                                        bool area_weighted = false) {
  const DiscreteModel model = DiscreteModel::from(scenario);
  std::vector<std::vector<double>> out;
  out.reserve(states.size());
  for (const auto& U : states) out.push_back(l1_distance(U, steady, model, area_weighted));
  return out;
}

inline std::vector<double> min_solvent_series(std::span<const UnknownVector> states, const ScenarioConfig& scenario,
                                              double lo = 0.4, double hi = 0.6) {
  const DiscreteModel model = DiscreteModel::from(scenario);
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& U : states) out.push_back(min_solvent_in(U, model, lo, hi));
  return out;
}

// True when the steady state has a vanishing fraction somewhere, in which case
// the relative entropy relies on the 0 log 0 = 0 convention.
inline bool reference_touches_boundary(const ReferenceState& ref) {
  return std::any_of(ref.u.begin(), ref.u.end(), [](const SimplexPoint& p) { return !p.strictly_interior(); });
}

struct RunComparison {
  std::vector<double> l1;  // per species, then the potential
  std::vector<double> l2;
  double semimetric = 0.0;
};

// Distances between two states on the same grid (h-weighted cell sums).
inline RunComparison compare_states(const UnknownVector& a, const UnknownVector& b, const ScenarioConfig& scenario,
                                    double eps = 0.0) {
  if (!a.same_shape(b)) throw DimensionError("states live on different grids");
  const DiscreteModel model = DiscreteModel::from(scenario);
  model.check(a);
  RunComparison c;
  c.l1.assign(model.species + 1, 0.0);
  c.l2.assign(model.species + 1, 0.0);
  for (std::size_t m = 0; m < model.cells; ++m) {
    for (std::size_t k = 0; k <= model.species; ++k) {
      const std::size_t j = a.index(m, k);
      const double d = a.values()[j] - b.values()[j];
      c.l1[k] += model.h * std::abs(d);
      c.l2[k] += model.h * d * d;
    }
  }
  for (double& v : c.l2) v = std::sqrt(v);
  const std::vector<double> w(model.cells, model.h);
  c.semimetric = gajewski_semimetric(cell_points(a, model), cell_points(b, model), eps, w);
  return c;
}

// ---------------------------------------------------------------------------
// Two-pass analysis

struct RunAnalysis {
  RunResult run;                 // second pass, reports carry reference metrics
  ReferenceState steady;         // final state of the first pass
  bool steady_reached = false;
  bool reference_degenerate = false;
  std::vector<double> times;
  std::vector<double> entropy;   // relative entropy per step
  std::vector<double> l1_total;  // sum over species of the L1 errors
  std::optional<DecayFit> entropy_fit;
  std::optional<DecayFit> l1_fit;
  std::optional<double> ck;
  std::optional<PlateauReport> plateau;
  std::string fit_note;          // why a fit is missing, if it is
};

// Runs the scenario once to find the end state, then again (bitwise identical
// trajectory) measuring every step against it.
inline RunAnalysis analyze_run(const ScenarioConfig& scenario, const TimeLoopSettings& settings,
                               bool area_weighted_l1 = false,
                               std::function<void(const StepReport&, const UnknownVector&)> on_step = {}) {
  RunAnalysis a;
  const RunResult first = run(scenario, settings);
  const DiscreteModel model = DiscreteModel::from(scenario);
  a.steady = reference_from_state(first.final_state, model);
  a.steady_reached = first.termination == Termination::Steady;
  a.reference_degenerate = reference_touches_boundary(a.steady);

  RunOptions opt;
  opt.reference = ReferenceMetrics{a.steady, area_weighted_l1};
  opt.on_step = std::move(on_step);
  a.run = run(scenario, settings, opt);

  for (const auto& r : a.run.reports) {
    a.times.push_back(r.time);
    a.entropy.push_back(r.relative_entropy);
    double s = 0.0;
    for (std::size_t i = 0; i < model.species; ++i) s += r.l1_error[i];
    a.l1_total.push_back(s);
  }
  const FitWindow window = default_decay_window(a.entropy.size());
  try {
    a.entropy_fit = fit_decay_rate(a.entropy, a.times, window);
    a.l1_fit = fit_decay_rate(a.l1_total, a.times, window);
    a.ck = ck_ratio(*a.entropy_fit, *a.l1_fit);
  } catch (const FitError& e) {
    a.fit_note = e.what();
  }
  a.plateau = plateau_detector(a.entropy, a.times);
  return a;
}

// Smallest channel solvent fraction over the plateau window (NaN when no plateau).
inline double plateau_min_solvent(const RunAnalysis& a) {
  double best = std::numeric_limits<double>::quiet_NaN();
  if (!a.plateau || !a.plateau->detected) return best;
  const auto& reps = a.run.reports;
  for (std::size_t k = a.plateau->plateau.begin; k < a.plateau->plateau.end && k < reps.size(); ++k)
    if (!(best <= reps[k].min_solvent_channel)) best = reps[k].min_solvent_channel;
  return best;
}

}  // namespace sepnp
