#pragma once

// Damped Newton solver, implicit-Euler time loop and steady-state detection.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sepnp/banded.hpp"
#include "sepnp/core_model.hpp"
#include "sepnp/discretization.hpp"
#include "sepnp/errors.hpp"
#include "sepnp/scenario.hpp"

namespace sepnp {

struct NewtonSettings {
  double residual_tolerance = 1e-12;  // on the max-norm of F
  int max_iterations = 50;
  double armijo = 1e-4;
  double min_step = 1.0 / 1048576.0;  // 2^-20
  bool feasibility_guard = true;
  double feasibility_slack = 1e-12;
  // After reaching the tolerance, take one more full step unless the residual is
  // already at the rounding floor. Keeps the conservation error at rounding level.
  bool polish = true;
};

struct NewtonResult {
  UnknownVector solution;
  int iterations = 0;
  double residual = 0.0;
  int backtracks = 0;
};

namespace detail {

inline double max_norm(std::span<const double> v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

inline double sum_squares(std::span<const double> v) {
  double r = 0.0;
  for (double x : v) r += x * x;
  return r;
}

inline bool feasible(const UnknownVector& U, const DiscreteModel& model, double slack) {
  for (std::size_t m = 0; m < model.cells; ++m) {
    double rest = 1.0 - model.oxygen[m];
    for (std::size_t i = 0; i < model.species; ++i) {
      const double v = U.u(m, i);
      if (!(v >= -slack)) return false;
      rest -= v;
    }
    if (!(rest >= -slack)) return false;
  }
  return true;
}

}  // namespace detail

inline NewtonResult newton_solve(const UnknownVector& guess, const UnknownVector& previous, double dt,
                                 const DiscreteModel& model, const NewtonSettings& settings = {}) {
  if (!(settings.residual_tolerance > 0.0) || settings.max_iterations < 1)
    throw ParameterError("invalid Newton settings");
  for (double v : guess.values())
    if (!std::isfinite(v)) throw DomainError("Newton guess is not finite");

  NewtonResult out{guess, 0, 0.0, 0};
  UnknownVector& U = out.solution;
  std::vector<double> F = assemble_residual(U, previous, dt, model);
  double norm = detail::max_norm(F);
  const double floor = settings.residual_tolerance * 1e-3;
  bool polishing = false;

  while (true) {
    if (norm <= settings.residual_tolerance) {
      // Even a guess that already meets the tolerance gets one step, so a slowly
      // drifting state is not mistaken for a stationary one.
      if (!settings.polish || polishing || norm <= floor) break;
      polishing = true;
    } else if (out.iterations >= settings.max_iterations) {
      throw NewtonFailure("Newton did not converge in " + std::to_string(out.iterations) + " iterations",
                          out.iterations, norm);
    }

    const SparseSystem sys = assemble_jacobian(U, previous, dt, model);
    const std::vector<double> delta = linear_solve(sys);
    ++out.iterations;

    const double f2 = detail::sum_squares(F);
    double step = 1.0;
    UnknownVector trial = U;
    std::vector<double> F_trial;
    while (true) {
      auto t = trial.values();
      auto u = U.values();
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = u[k] + step * delta[k];
      const bool ok_domain = !settings.feasibility_guard || detail::feasible(trial, model, settings.feasibility_slack);
      if (ok_domain) {
        F_trial = assemble_residual(trial, previous, dt, model);
        const double t2 = detail::sum_squares(F_trial);
        if (polishing) {
          if (t2 <= f2) break;
        } else if (std::isfinite(t2) && t2 <= (1.0 - 2.0 * settings.armijo * step) * f2) {
          break;
        }
      }
      if (polishing) {
        // The polishing step did not help; keep the converged iterate.
        F_trial.clear();
        break;
      }
      step *= 0.5;
      ++out.backtracks;
      if (step < settings.min_step)
        throw NewtonFailure("Newton damping reached the minimum step", out.iterations, norm);
    }
    if (polishing) {
      if (!F_trial.empty()) {
        U = std::move(trial);
        F = std::move(F_trial);
        norm = detail::max_norm(F);
      }
      break;
    }
    U = std::move(trial);
    F = std::move(F_trial);
    norm = detail::max_norm(F);
  }
  out.residual = norm;
  return out;
}

// err_k = sum_i (sum_m h (du_i)^2)^{1/2} + (sum_m h (dPhi)^2)^{1/2}
inline double step_error(const UnknownVector& current, const UnknownVector& previous, double h) {
  if (!current.same_shape(previous)) throw DimensionError("step_error needs states on the same grid");
  double total = 0.0;
  for (std::size_t i = 0; i <= current.species(); ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < current.cells(); ++m) {
      const std::size_t k = current.index(m, i);  // i == species addresses the potential
      const double d = current.values()[k] - previous.values()[k];
      s += h * d * d;
    }
    total += std::sqrt(s);
  }
  return total;
}

// Solves the discrete Poisson equation for fixed concentrations; returns Phi per cell.
inline std::vector<double> solve_poisson(const UnknownVector& U, const DiscreteModel& model) {
  model.check(U);
  const std::size_t M = model.cells;
  BandMatrix A(M, 1, 1);
  std::vector<double> b(M, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    const double cl = model.lambda_sq * model.poisson_edge[m];
    const double cr = model.lambda_sq * model.poisson_edge[m + 1];
    A.add(m, m, cl + cr);
    if (m > 0) A.add(m, m - 1, -cl);
    else b[m] += cl * model.phi_left;
    if (m + 1 < M) A.add(m, m + 1, -cr);
    else b[m] += cr * model.phi_right;
    double rho = model.charge[m];
    for (std::size_t i = 0; i < model.species; ++i) rho += model.valence[i] * U.u(m, i);
    b[m] += model.poisson_cell[m] * rho;
  }
  return solve_banded(std::move(A), std::move(b));
}

struct InitialStateReport {
  double min_solvent = 0.0;
  double poisson_residual = 0.0;  // max-norm of the Poisson rows at the returned state
};

// Concentrations linear in x between the bath values (sampled at cell centers),
// potential from the discrete Poisson equation.
inline std::pair<UnknownVector, InitialStateReport> initial_state(const DiscreteModel& model) {
  UnknownVector U(model.cells, model.species);
  InitialStateReport report;
  report.min_solvent = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < model.cells; ++m) {
    const double x = (static_cast<double>(m) + 0.5) * model.h;
    for (std::size_t i = 0; i < model.species; ++i)
      U.u(m, i) = (1.0 - x) * model.ghost_left[i] + x * model.ghost_right[i];
    const double u0 = model.solvent(U, m);
    if (!(u0 > 0.0))
      throw InfeasibleStateError("initial interpolant leaves no solvent in cell " + std::to_string(m));
    report.min_solvent = std::min(report.min_solvent, u0);
  }
  const auto phi = solve_poisson(U, model);
  for (std::size_t m = 0; m < model.cells; ++m) U.phi(m) = phi[m];
  for (std::size_t m = 0; m < model.cells; ++m)
    report.poisson_residual = std::max(report.poisson_residual, std::abs(poisson_residual(m, U, model)));
  return {std::move(U), report};
}

inline std::pair<UnknownVector, InitialStateReport> initial_state(const ScenarioConfig& scenario) {
  return initial_state(DiscreteModel::from(scenario));
}

struct TimeLoopSettings {
  double dt = 1e-3;
  std::size_t max_steps = 100000;
  double steady_tolerance = 1e-13;
  bool stop_when_steady = true;
  // Step-size control on Newton failure: halve down to dt * dt_floor, restore
  // (doubling) after `restore_after` accepted steps.
  double dt_floor = 1.0 / 1024.0;
  int restore_after = 10;
  NewtonSettings newton;

  static TimeLoopSettings from(const ScenarioConfig& sc) {
    TimeLoopSettings t;
    t.dt = sc.dt;
    t.steady_tolerance = sc.steady_tolerance;
    t.newton.residual_tolerance = sc.newton_tolerance;
    return t;
  }
};

struct StepReport {
  std::size_t step = 0;
  double time = 0.0;
  double dt = 0.0;
  int newton_iterations = 0;
  double err = 0.0;
  double free_energy = 0.0;
  double relative_entropy = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> l1_error;  // per species then the potential; empty without reference
  std::vector<double> mass;      // sum_m a_m h u_{i,m}
  double min_solvent_channel = std::numeric_limits<double>::quiet_NaN();
  double min_solvent = 0.0;
  double wall_seconds = 0.0;
};

enum class Termination { Steady, MaxSteps, Failure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Steady: return "steady";
    case Termination::MaxSteps: return "max_steps";
    case Termination::Failure: return "failure";
  }
  return "?";
}

// Quantities computed against a known reference (usually the steady state).
struct ReferenceMetrics {
  ReferenceState reference;
  bool area_weighted_l1 = false;
};

struct RunOptions {
  std::optional<ReferenceMetrics> reference;
  // Cells whose centers lie in this window count as the channel for min-solvent tracking.
  double channel_lo = 0.4;
  double channel_hi = 0.6;
  // Called once per accepted step; must not retain references past the call.
  std::function<void(const StepReport&, const UnknownVector&)> on_step;
};

struct RunResult {
  UnknownVector initial;
  UnknownVector final_state;
  std::vector<StepReport> reports;
  Termination termination = Termination::MaxSteps;
  std::string diagnostic;
  std::size_t dt_reductions = 0;
};

inline std::vector<double> masses(const UnknownVector& U, const DiscreteModel& model) {
  std::vector<double> out(model.species, 0.0);
  for (std::size_t i = 0; i < model.species; ++i)
    for (std::size_t m = 0; m < model.cells; ++m) out[i] += model.cell_area[m] * model.h * U.u(m, i);
  return out;
}

// Sum_m w_m |u - u_ref| per species, then the potential; w_m = h or h a_m.
inline std::vector<double> l1_distance(const UnknownVector& U, const ReferenceState& ref, const DiscreteModel& model,
                                       bool area_weighted) {
  if (ref.u.size() != model.cells || ref.phi.size() != model.cells)
    throw DimensionError("reference lives on a different grid");
  std::vector<double> out(model.species + 1, 0.0);
  for (std::size_t m = 0; m < model.cells; ++m) {
    const double w = model.h * (area_weighted ? model.cell_area[m] : 1.0);
    for (std::size_t i = 0; i < model.species; ++i) out[i] += w * std::abs(U.u(m, i) - ref.u[m][i]);
    out[model.species] += w * std::abs(U.phi(m) - ref.phi[m]);
  }
  return out;
}

inline double min_solvent_in(const UnknownVector& U, const DiscreteModel& model, double lo, double hi) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t m = 0; m < model.cells; ++m) {
    const double x = (static_cast<double>(m) + 0.5) * model.h;
    if (x < lo || x > hi) continue;
    const double u0 = model.solvent(U, m);
    if (!(best <= u0)) best = u0;
  }
  return best;
}

// Converts a computed state into a reference (steady state) for relative entropies.
inline ReferenceState reference_from_state(const UnknownVector& U, const DiscreteModel& model) {
  ReferenceState ref;
  ref.role = ReferenceState::Role::Steady;
  ref.u = cell_points(U, model);
  ref.phi = potentials(U);
  return ref;
}

// Relative entropy of U with respect to a reference state, using the same
// discrete gradient and weights as the Poisson operator.
inline double relative_entropy(const UnknownVector& U, const ReferenceState& ref, const DiscreteModel& model,
                               const ScenarioConfig& scenario) {
  return free_energy(U, ref, model, scenario.species, scenario.params);
}

namespace detail {

inline StepReport make_report(std::size_t k, double time, double dt, int iters, double err, const UnknownVector& U,
                              const DiscreteModel& model, const ScenarioConfig& scenario,
                              const ReferenceState& dirichlet_ref, const RunOptions& opt) {
  StepReport r;
  r.step = k;
  r.time = time;
  r.dt = dt;
  r.newton_iterations = iters;
  r.err = err;
  r.free_energy = free_energy(U, dirichlet_ref, model, scenario.species, scenario.params);
  if (opt.reference) {
    r.relative_entropy = relative_entropy(U, opt.reference->reference, model, scenario);
    r.l1_error = l1_distance(U, opt.reference->reference, model, opt.reference->area_weighted_l1);
  }
  r.mass = masses(U, model);
  r.min_solvent_channel = min_solvent_in(U, model, opt.channel_lo, opt.channel_hi);
  r.min_solvent = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < model.cells; ++m) r.min_solvent = std::min(r.min_solvent, model.solvent(U, m));
  return r;
}

}  // namespace detail

// Marches the implicit-Euler scheme from `start` until err_k < steady_tolerance,
// max_steps accepted steps, or an unrecoverable Newton failure.
inline RunResult run_from(const ScenarioConfig& scenario, const UnknownVector& start, const TimeLoopSettings& settings,
                          const RunOptions& options = {}) {
  if (!(settings.dt > 0.0)) throw ParameterError("dt must be positive");
  if (!(settings.steady_tolerance > 0.0)) throw ParameterError("steady tolerance must be positive");
  const DiscreteModel model = DiscreteModel::from(scenario);
  model.check(start);
  const ReferenceState dirichlet_ref = dirichlet_reference(model);

  RunResult result;
  result.initial = start;
  UnknownVector U = start;
  double dt = settings.dt;
  const double dt_min = settings.dt * settings.dt_floor;
  int accepted_since_cut = 0;
  double time = 0.0;
  std::size_t k = 0;
  const auto clock_start = std::chrono::steady_clock::now();

  while (k < settings.max_steps) {
    NewtonResult nr;
    try {
      nr = newton_solve(U, U, dt, model, settings.newton);
    } catch (const Error& e) {
      if (dynamic_cast<const NewtonFailure*>(&e) == nullptr && dynamic_cast<const LinearSolveError*>(&e) == nullptr)
        throw;
      if (dt * 0.5 < dt_min * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "step " << (k + 1) << ": " << e.what() << " at dt floor " << dt << "; last accepted time " << time
           << ", max|F| at failure ";
        if (const auto* nf = dynamic_cast<const NewtonFailure*>(&e)) os << nf->residual();
        else os << "n/a";
        os << ", min solvent " << min_solvent_in(U, model, 0.0, 1.0);
        result.termination = Termination::Failure;
        result.diagnostic = os.str();
        break;
      }
      dt *= 0.5;
      accepted_since_cut = 0;
      ++result.dt_reductions;
      continue;
    }
    ++k;
    time += dt;
    const double err = step_error(nr.solution, U, model.h);
    U = std::move(nr.solution);
    StepReport report =
        detail::make_report(k, time, dt, nr.iterations, err, U, model, scenario, dirichlet_ref, options);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    if (options.on_step) options.on_step(report, U);
    result.reports.push_back(std::move(report));

    const bool nominal = dt == settings.dt;
    if (!nominal && ++accepted_since_cut >= settings.restore_after) {
      dt = std::min(settings.dt, 2.0 * dt);
      accepted_since_cut = 0;
    }
    if (settings.stop_when_steady && nominal && err < settings.steady_tolerance) {
      result.termination = Termination::Steady;
      break;
    }
  }
  result.final_state = std::move(U);
  return result;
}

inline RunResult run(const ScenarioConfig& scenario, const TimeLoopSettings& settings, const RunOptions& options = {}) {
  return run_from(scenario, initial_state(scenario).first, settings, options);
}

// Integrates to a fixed final time with a fixed step (no steady-state stop).
inline UnknownVector integrate_to(const ScenarioConfig& scenario, const UnknownVector& start, double dt,
                                  double final_time, const NewtonSettings& newton = {}) {
  const DiscreteModel model = DiscreteModel::from(scenario);
  const auto steps = static_cast<std::size_t>(std::llround(final_time / dt));
  if (steps == 0 || std::abs(static_cast<double>(steps) * dt - final_time) > 1e-9 * final_time)
    throw ParameterError("final time must be a positive multiple of dt");
  UnknownVector U = start;
  for (std::size_t k = 0; k < steps; ++k) U = newton_solve(U, U, dt, model, newton).solution;
  return U;
}

struct ConvergenceStudy {
  std::vector<double> dts;
  std::vector<double> differences;  // ||u_{dt_k} - u_{dt_{k+1}}|| in the err_k norm
  double observed_order = 0.0;
};

// Observed temporal order from solutions at a fixed final time with dt shrinking
// by a constant ratio: p = log(e_1/e_2) / log(ratio), e_k = |U_{k} - U_{k+1}|.
inline ConvergenceStudy self_convergence(const ScenarioConfig& scenario, const std::vector<double>& dts,
                                         double final_time, const NewtonSettings& newton = {}) {
  if (dts.size() < 3) throw ParameterError("self-convergence needs at least three time steps");
  const double ratio = dts[0] / dts[1];
  for (std::size_t k = 1; k + 1 < dts.size(); ++k)
    if (std::abs(dts[k] / dts[k + 1] - ratio) > 1e-9 * ratio)
      throw ParameterError("time steps must shrink by a constant ratio");
  if (!(ratio > 1.0)) throw ParameterError("time steps must decrease");

  const DiscreteModel model = DiscreteModel::from(scenario);
  const UnknownVector start = initial_state(model).first;
  std::vector<UnknownVector> sols;
  for (double dt : dts) sols.push_back(integrate_to(scenario, start, dt, final_time, newton));

  ConvergenceStudy study;
  study.dts = dts;
  for (std::size_t k = 0; k + 1 < sols.size(); ++k) study.differences.push_back(step_error(sols[k], sols[k + 1], model.h));
  const std::size_t last = study.differences.size() - 1;
  study.observed_order = std::log(study.differences[last - 1] / study.differences[last]) / std::log(ratio);
  return study;
}

}  // namespace sepnp
