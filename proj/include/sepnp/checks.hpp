#pragma once

// Property checks run by `sepnp check` and by the acceptance binary. Each check
// is deterministic (fixed seeds) and reports the worst deviation it saw.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sepnp/core_model.hpp"
#include "sepnp/discretization.hpp"
#include "sepnp/scenario.hpp"
#include "sepnp/solver.hpp"

namespace sepnp {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace checks {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

// n+1 positive fractions summing to one (last one is the solvent).
inline std::vector<double> random_simplex(Rng& rng, std::size_t n, double floor = 1e-3) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> v(n + 1);
  double s = 0.0;
  for (double& x : v) {
    x = ex(rng) + floor;
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

inline SimplexPoint random_point(Rng& rng, std::size_t n) {
  auto v = random_simplex(rng, n);
  const double u0 = v.back();
  v.pop_back();
  return SimplexPoint::with_solvent(std::move(v), 0.0, u0);
}

inline std::vector<SpeciesSpec> random_species(Rng& rng, std::size_t n) {
  std::vector<SpeciesSpec> s;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = static_cast<double>(std::uniform_int_distribution<int>(-2, 2)(rng));
    s.push_back({"s" + std::to_string(i), uniform(rng, 0.5, 2.0), z, {}});
  }
  return s;
}

// Interior state on the scenario's grid: every cell keeps between 10% and
// `max_solvent_share` of its free volume as solvent. The potential solves the
// discrete Poisson equation.
inline UnknownVector random_interior_state(Rng& rng, const DiscreteModel& model, double max_solvent_share = 0.9) {
  UnknownVector U(model.cells, model.species);
  for (std::size_t m = 0; m < model.cells; ++m) {
    const double free = 1.0 - model.oxygen[m];
    auto v = random_simplex(rng, model.species, 0.05);
    const double keep = uniform(rng, 0.1, max_solvent_share);
    for (std::size_t i = 0; i < model.species; ++i) U.u(m, i) = free * (1.0 - keep) * v[i] / (1.0 - v.back());
  }
  const auto phi = solve_poisson(U, model);
  for (std::size_t m = 0; m < model.cells; ++m) U.phi(m) = phi[m];
  return U;
}

template <class F>
CheckResult timed(const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace checks

// sum_i u_i u_0 |grad log(u_i/u_0)|^2 against its square-root form.
inline CheckResult check_degenerate_identity(std::size_t samples = 1000, std::uint64_t seed = 1) {
  return checks::timed("algebraic identity", [&] {
    checks::Rng rng(seed);
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t n = 1 + s % 3;
      const SimplexPoint p = checks::random_point(rng, n);
      std::vector<double> g(n);
      for (double& x : g) x = checks::uniform(rng, -1.0, 1.0);
      const auto [lhs, rhs] = degenerate_identity_sides(p, g);
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
    }
    return CheckResult{"", worst <= 1e-12, "max |L-R|/(1+|L|) = " + checks::sci(worst), 0.0};
  });
}

// u -> w -> u and w -> u -> w, including entropy variables of magnitude 700.
inline CheckResult check_entropy_roundtrip(std::size_t samples = 1000, std::uint64_t seed = 2) {
  return checks::timed("entropy-variable roundtrip", [&] {
    checks::Rng rng(seed);
    PhysicalParams params;
    double worst_u = 0.0, worst_w = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t n = 1 + s % 3;
      params.n_species = n;
      const auto species = checks::random_species(rng, n);
      const double phi = checks::uniform(rng, -5.0, 5.0);

      // u -> w -> u, with components spread over many decades.
      std::vector<double> logs(n + 1);
      for (double& l : logs) l = checks::uniform(rng, -300.0, 0.0);
      const double top = *std::max_element(logs.begin(), logs.end());
      double total = 0.0;
      for (double& l : logs) total += std::exp(l - top);
      std::vector<double> c(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = std::exp(logs[i] - top) / total;
      const double u0 = std::exp(logs[n] - top) / total;
      const SimplexPoint p = SimplexPoint::with_solvent(c, 0.0, u0);
      const SimplexPoint back = invert_entropy_variables(entropy_variables(p, phi, params, species), phi, params, species);
      for (std::size_t i = 0; i < n; ++i) worst_u = std::max(worst_u, std::abs(back[i] - p[i]) / p[i]);
      worst_u = std::max(worst_u, std::abs(back.solvent() - p.solvent()) / p.solvent());

      // w -> u -> w. Mixed signs are limited to a spread the double range can hold;
      // every fifth sample pins components at +-700.
      EntropyPoint w;
      w.w.resize(n);
      const int mode = static_cast<int>(s % 5);
      for (std::size_t i = 0; i < n; ++i) {
        if (mode == 0) w.w[i] = 700.0 - checks::uniform(rng, 0.0, 5.0);
        else if (mode == 1) w.w[i] = -700.0 + checks::uniform(rng, 0.0, 5.0);
        else if (mode == 2 && i == 0) w.w[i] = (s % 2 ? 700.0 : -700.0);
        else w.w[i] = checks::uniform(rng, -350.0, 350.0);
      }
      if (mode == 2)
        for (std::size_t i = 1; i < n; ++i) w.w[i] = w.w[0] + checks::uniform(rng, -5.0, 5.0);
      const SimplexPoint u = invert_entropy_variables(w, phi, params, species);
      const EntropyPoint w2 = entropy_variables(u, phi, params, species);
      for (std::size_t i = 0; i < n; ++i)
        worst_w = std::max(worst_w, std::abs(w2.w[i] - w.w[i]) / std::max(1.0, std::abs(w.w[i])));
    }
    const double worst = std::max(worst_u, worst_w);
    return CheckResult{"", worst <= 1e-12,
                       "u->w->u " + checks::sci(worst_u) + ", w->u->w " + checks::sci(worst_w), 0.0};
  });
}

// Primitive-variable flux against Lambda(u_i) Lambda(u_0) (w_R - w_L). The
// deviation is measured against the size of the largest term in the flux.
inline CheckResult check_flux_equivalence(std::size_t samples = 1000, std::uint64_t seed = 3) {
  return checks::timed("flux / entropy-variable equivalence", [&] {
    checks::Rng rng(seed);
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t n = 1 + s % 3;
      auto a = checks::random_simplex(rng, n);
      auto b = checks::random_simplex(rng, n);
      // Every other pair is a close neighbor pair, the regime of a fine grid.
      if (s % 2) {
        for (std::size_t k = 0; k <= n; ++k) b[k] = a[k] * (1.0 + checks::uniform(rng, -1e-3, 1e-3));
        double t = 0.0;
        for (double x : b) t += x;
        for (double& x : b) x /= t;
      }
      const double pa = checks::uniform(rng, -3.0, 3.0);
      const double pb = pa + checks::uniform(rng, -1.0, 1.0);
      const CellView L{std::span<const double>(a).first(n), a[n], pa};
      const CellView R{std::span<const double>(b).first(n), b[n], pb};
      const double D = checks::uniform(rng, 0.5, 2.0);
      const double z = static_cast<double>(std::uniform_int_distribution<int>(-2, 2)(rng));
      const double d = checks::uniform(rng, 1e-3, 1e-1);
      for (std::size_t i = 0; i < n; ++i) {
        const double primitive = edge_flux(i, L, R, d, D, z, 1.0);
        const double entropy = edge_flux_entropy_form(i, L, R, d, D, z, 1.0);
        const double li = log_mean(a[i], b[i]), l0 = log_mean(a[n], b[n]);
        const double scale = D / d *
                             std::max({std::abs(l0 * (b[i] - a[i])), std::abs(li * (b[n] - a[n])),
                                       std::abs(z * li * l0 * (pb - pa)), 1e-300});
        worst = std::max(worst, std::abs(primitive - entropy) / scale);
      }
    }
    return CheckResult{"", worst <= 1e-12, "max relative deviation " + checks::sci(worst), 0.0};
  });
}

// Analytic Jacobian against central differences with step 1e-6. Deviations are
// relative to the largest entry of the row, since single entries can be sums of
// nearly cancelling terms.
inline CheckResult check_jacobian(std::size_t states_per_preset = 100, std::size_t cells = 20,
                                  std::uint64_t seed = 4) {
  return checks::timed("Jacobian exactness", [&] {
    checks::Rng rng(seed);
    double worst = 0.0;
    for (Preset preset : {Preset::Calcium, Preset::Degenerate}) {
      ScenarioOverrides o;
      o.n_cells = cells;
      const ScenarioConfig sc = build_scenario(preset, o);
      const DiscreteModel model = DiscreteModel::from(sc);
      const double dt = sc.dt;
      for (std::size_t s = 0; s < states_per_preset; ++s) {
        UnknownVector U = checks::random_interior_state(rng, model, 0.5);
        for (std::size_t m = 0; m < model.cells; ++m) U.phi(m) += checks::uniform(rng, -0.5, 0.5);
        const UnknownVector prev = checks::random_interior_state(rng, model, 0.5);
        const SparseSystem J = assemble_jacobian(U, prev, dt, model);
        const double step = 1e-6;
        std::vector<double> row_scale(U.size(), 0.0);
        for (std::size_t r = 0; r < U.size(); ++r)
          for (std::size_t c = 0; c < U.size(); ++c) row_scale[r] = std::max(row_scale[r], std::abs(J.matrix(r, c)));
        for (std::size_t c = 0; c < U.size(); ++c) {
          UnknownVector up = U, dn = U;
          up.values()[c] += step;
          dn.values()[c] -= step;
          const auto Fp = assemble_residual(up, prev, dt, model);
          const auto Fm = assemble_residual(dn, prev, dt, model);
          for (std::size_t r = 0; r < U.size(); ++r) {
            const double fd = (Fp[r] - Fm[r]) / (2.0 * step);
            const double an = J.matrix(r, c);
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), row_scale[r]));
          }
        }
      }
    }
    return CheckResult{"", worst <= 1e-6, "max relative deviation " + checks::sci(worst), 0.0};
  });
}

// Per-species mass drift of the no-flux calcium variant.
inline CheckResult check_conservation(std::size_t steps = 500) {
  return checks::timed("mass conservation (no-flux)", [&] {
    ScenarioOverrides o;
    o.boundary_mode = BoundaryMode::NoFlux;
    const ScenarioConfig sc = build_scenario(Preset::Calcium, o);
    const DiscreteModel model = DiscreteModel::from(sc);
    const UnknownVector start = initial_state(model).first;
    const auto m0 = masses(start, model);
    TimeLoopSettings t = TimeLoopSettings::from(sc);
    t.max_steps = steps;
    t.stop_when_steady = false;
    const RunResult r = run_from(sc, start, t);
    double worst = 0.0;
    for (const auto& rep : r.reports)
      for (std::size_t i = 0; i < model.species; ++i) worst = std::max(worst, std::abs(rep.mass[i] - m0[i]) / m0[i]);
    const bool ok = r.termination != Termination::Failure && r.reports.size() == steps && worst <= 1e-10;
    return CheckResult{"", ok,
                       std::to_string(r.reports.size()) + " steps, max relative drift " + checks::sci(worst), 0.0};
  });
}

// Free energy along a run with equal baths from a perturbed start.
inline CheckResult check_entropy_monotonicity(std::uint64_t seed = 6) {
  return checks::timed("entropy monotonicity", [&] {
    checks::Rng rng(seed);
    const ScenarioConfig sc = build_scenario(Preset::Calcium);
    const DiscreteModel model = DiscreteModel::from(sc);
    UnknownVector start = initial_state(model).first;
    for (std::size_t m = 0; m < model.cells; ++m)
      for (std::size_t i = 0; i < model.species; ++i) start.u(m, i) *= 1.0 + checks::uniform(rng, -0.5, 0.5);
    const auto phi = solve_poisson(start, model);
    for (std::size_t m = 0; m < model.cells; ++m) start.phi(m) = phi[m];

    const ReferenceState ref = dirichlet_reference(model);
    double prev = free_energy(start, ref, model, sc.species, sc.params);
    const double initial = prev;
    double worst_rise = 0.0;
    std::size_t steps = 0;
    TimeLoopSettings t = TimeLoopSettings::from(sc);
    RunOptions opt;
    opt.on_step = [&](const StepReport& r, const UnknownVector&) {
      worst_rise = std::max(worst_rise, r.free_energy - prev);
      prev = r.free_energy;
      ++steps;
    };
    const RunResult r = run_from(sc, start, t, opt);
    const bool ok = r.termination == Termination::Steady && worst_rise <= 1e-10;
    return CheckResult{"", ok,
                       std::to_string(steps) + " steps (" + to_string(r.termination) + "), H " + checks::sci(initial) +
                           " -> " + checks::sci(prev) + ", max rise " + checks::sci(worst_rise),
                       0.0};
  });
}

// Dense Gaussian elimination with partial pivoting; reference solver for small systems.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(A[i][k]) > std::abs(A[p][k])) p = i;
    std::swap(A[k], A[p]);
    std::swap(b[k], b[p]);
    if (A[k][k] == 0.0) throw LinearSolveError("singular dense system");
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A[i][k] / A[k][k];
      for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= A[k][j] * x[j];
    x[k] = s / A[k][k];
  }
  return x;
}

// Poisson system written out directly from the cell balance
//   -lambda^2 [ c_{m+1} (Phi_{m+1} - Phi_m) - c_m (Phi_m - Phi_{m-1}) ] = |K_m| rho_m
inline std::vector<double> dense_poisson_oracle(const UnknownVector& U, const ScenarioConfig& sc) {
  const Grid1D grid = sc.grid();
  const ChannelGeometry geom = sc.geometry();
  const std::size_t M = grid.n_cells();
  const double h = grid.cell_width();
  const bool weighted = sc.discretization.poisson_area_weighting;
  const double boundary_d = sc.discretization.closure == BoundaryClosure::HalfCell ? 0.5 * h : h;
  auto conductance = [&](std::size_t e) {
    const double d = (e == 0 || e == M) ? boundary_d : h;
    return (weighted ? geom.edge_area[e] : 1.0) / d;
  };
  std::vector<std::vector<double>> A(M, std::vector<double>(M, 0.0));
  std::vector<double> b(M, 0.0);
  const double l2 = sc.params.lambda_sq;
  for (std::size_t m = 0; m < M; ++m) {
    const double cl = conductance(m), cr = conductance(m + 1);
    A[m][m] = l2 * (cl + cr);
    if (m > 0) A[m][m - 1] = -l2 * cl;
    else b[m] += l2 * cl * sc.boundary.phi_left;
    if (m + 1 < M) A[m][m + 1] = -l2 * cr;
    else b[m] += l2 * cr * sc.boundary.phi_right;
    double rho = geom.charge[m];
    for (std::size_t i = 0; i < sc.species.size(); ++i) rho += sc.species[i].valence * U.u(m, i);
    b[m] += h * (weighted ? geom.cell_area[m] : 1.0) * rho;
  }
  return dense_solve(std::move(A), std::move(b));
}

// Single positive species at constant concentration c, unit areas, no oxygen,
// Phi = 0 at x = 0 and x = 1: Phi(x) = c x (1-x) / (2 lambda^2).
inline ScenarioConfig constant_charge_scenario(std::size_t cells, double c, double lambda_sq) {
  ScenarioOverrides o;
  o.species = std::vector<SpeciesSpec>{{"p", 1.0, 1.0, {}}};
  o.beta = 1.0;
  o.lambda_sq = lambda_sq;
  o.u_left = std::vector<double>{c};
  o.u_right = std::vector<double>{c};
  o.n_cells = cells;
  o.closure = BoundaryClosure::HalfCell;
  return build_scenario(Preset::Custom, o);
}

// Banded Poisson solve against the dense oracle, then the parabola under refinement.
inline CheckResult check_poisson_oracle(std::uint64_t seed = 7) {
  return checks::timed("discrete Poisson oracle", [&] {
    checks::Rng rng(seed);
    double worst_oracle = 0.0;
    for (std::size_t M : {8u, 17u, 32u, 64u}) {
      for (Preset preset : {Preset::Calcium, Preset::Degenerate}) {
        for (int variant = 0; variant < 4; ++variant) {
          ScenarioOverrides o;
          o.n_cells = M;
          o.closure = variant % 2 ? BoundaryClosure::HalfCell : BoundaryClosure::FullCell;
          o.poisson_area_weighting = variant < 2;
          o.phi_left = checks::uniform(rng, -1.0, 1.0);
          o.phi_right = checks::uniform(rng, -1.0, 1.0);
          const ScenarioConfig sc = build_scenario(preset, o);
          const DiscreteModel model = DiscreteModel::from(sc);
          const UnknownVector U = checks::random_interior_state(rng, model);
          const auto banded = solve_poisson(U, model);
          const auto dense = dense_poisson_oracle(U, sc);
          double scale = 1.0;
          for (double v : dense) scale = std::max(scale, std::abs(v));
          for (std::size_t m = 0; m < M; ++m) worst_oracle = std::max(worst_oracle, std::abs(banded[m] - dense[m]) / scale);
        }
      }
    }

    const double c = 0.1, l2 = 1.0;
    std::vector<double> errors;
    for (std::size_t M : {16u, 32u, 64u, 128u}) {
      const ScenarioConfig sc = constant_charge_scenario(M, c, l2);
      const DiscreteModel model = DiscreteModel::from(sc);
      const UnknownVector U = initial_state(model).first;
      double e = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        const double x = (static_cast<double>(m) + 0.5) * model.h;
        e = std::max(e, std::abs(U.phi(m) - c * x * (1.0 - x) / (2.0 * l2)));
      }
      errors.push_back(e);
    }
    double order = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) order = std::min(order, std::log2(errors[k] / errors[k + 1]));
    const bool ok = worst_oracle <= 1e-12 && order >= 1.8;
    return CheckResult{"", ok, "oracle deviation " + checks::sci(worst_oracle) + ", parabola order " + checks::sci(order), 0.0};
  });
}

// Two species between different baths on a uniform tube: smooth, no oxygen.
inline ScenarioConfig smooth_scenario(std::size_t cells = 50) {
  ScenarioOverrides o;
  o.species = std::vector<SpeciesSpec>{{"a", 1.0, 1.0, {}}, {"b", 0.7, -1.0, {}}};
  o.beta = 1.0;
  o.lambda_sq = 0.1;
  o.u_left = std::vector<double>{0.3, 0.2};
  o.u_right = std::vector<double>{0.1, 0.35};
  o.phi_left = 0.5;
  o.phi_right = -0.5;
  o.n_cells = cells;
  return build_scenario(Preset::Custom, o);
}

inline CheckResult check_temporal_order() {
  return checks::timed("temporal self-convergence", [&] {
    const ConvergenceStudy st = self_convergence(smooth_scenario(), {4e-3, 2e-3, 1e-3, 5e-4}, 0.04);
    const double p = st.observed_order;
    return CheckResult{"", p >= 0.8 && p <= 1.2, "observed order " + checks::sci(p), 0.0};
  });
}

// d_eps >= 0, d_eps(u,u) = 0, symmetry and d_eps(u,v) >= |u-v|^2 / 8 for eps <= 1.
inline CheckResult check_semimetric(std::size_t samples = 1000, std::uint64_t seed = 11) {
  return checks::timed("semimetric properties", [&] {
    checks::Rng rng(seed);
    bool ok = true;
    double worst_self = 0.0, worst_sym = 0.0, min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t n = 1 + s % 3;
      const std::size_t cells = 1 + s % 7;
      const double eps = s % 4 == 0 ? 0.0 : std::pow(10.0, checks::uniform(rng, -6.0, 0.0));
      std::vector<SimplexPoint> u, v;
      std::vector<double> w;
      double l2 = 0.0;
      for (std::size_t m = 0; m < cells; ++m) {
        u.push_back(checks::random_point(rng, n));
        v.push_back(checks::random_point(rng, n));
        w.push_back(checks::uniform(rng, 0.01, 1.0));
        for (std::size_t i = 0; i < n; ++i) l2 += w.back() * (u[m][i] - v[m][i]) * (u[m][i] - v[m][i]);
      }
      const double duv = gajewski_semimetric(u, v, eps, w);
      const double dvu = gajewski_semimetric(v, u, eps, w);
      const double duu = gajewski_semimetric(u, u, eps, w);
      if (!(duv >= 0.0)) ok = false;
      worst_self = std::max(worst_self, std::abs(duu));
      worst_sym = std::max(worst_sym, std::abs(duv - dvu));
      min_margin = std::min(min_margin, duv - l2 / 8.0 + 1e-15);
    }
    ok = ok && worst_self == 0.0 && worst_sym <= 1e-15 && min_margin >= 0.0;
    return CheckResult{"", ok,
                       "d(u,u) max " + checks::sci(worst_self) + ", asymmetry " + checks::sci(worst_sym) +
                           ", min d - |u-v|^2/8 " + checks::sci(min_margin),
                       0.0};
  });
}

// Directional derivative of the free energy (potential re-solved after each
// perturbation) against a_m h (w_i - w_i^D).
struct ChemicalPotentialStudy {
  std::vector<double> deltas;
  std::vector<double> max_error;  // over the sampled cells and species
  double min_order = 0.0;
  double max_order = 0.0;
};

inline ChemicalPotentialStudy chemical_potential_study(std::uint64_t seed = 12, std::size_t n_cells_sampled = 10) {
  checks::Rng rng(seed);
  ScenarioOverrides o;
  o.n_cells = 50;
  const ScenarioConfig sc = build_scenario(Preset::Calcium, o);
  const DiscreteModel model = DiscreteModel::from(sc);
  // Every fraction stays well above the largest perturbation: ions take 15-25%
  // of the free volume each, the solvent the rest.
  UnknownVector U(model.cells, model.species);
  for (std::size_t m = 0; m < model.cells; ++m)
    for (std::size_t i = 0; i < model.species; ++i) U.u(m, i) = (1.0 - model.oxygen[m]) * checks::uniform(rng, 0.15, 0.25);
  const auto phi0 = solve_poisson(U, model);
  for (std::size_t m = 0; m < model.cells; ++m) U.phi(m) = phi0[m];
  const ReferenceState ref = dirichlet_reference(model);

  auto energy = [&](UnknownVector V) {
    const auto phi = solve_poisson(V, model);
    for (std::size_t m = 0; m < model.cells; ++m) V.phi(m) = phi[m];
    return free_energy(V, ref, model, sc.species, sc.params);
  };
  const double E0 = energy(U);

  ChemicalPotentialStudy st;
  st.deltas = {1e-3, 1e-4, 1e-5};
  st.max_error.assign(st.deltas.size(), 0.0);
  std::vector<std::vector<double>> errs;  // per (cell, species), per delta
  std::uniform_int_distribution<std::size_t> pick(0, model.cells - 1);
  for (std::size_t s = 0; s < n_cells_sampled; ++s) {
    const std::size_t m = pick(rng);
    const double u0 = model.solvent(U, m);
    for (std::size_t i = 0; i < model.species; ++i) {
      const double w = std::log(U.u(m, i) / u0) + model.beta * model.valence[i] * U.phi(m);
      const double wD =
          std::log(ref.u[m][i] / ref.u[m].solvent()) + model.beta * model.valence[i] * ref.phi[m];
      const double exact = model.cell_area[m] * model.h * (w - wD);
      std::vector<double> e;
      for (std::size_t k = 0; k < st.deltas.size(); ++k) {
        const double d = st.deltas[k];
        UnknownVector V = U;
        V.u(m, i) += d;
        const double fd = (energy(V) - E0) / d;
        e.push_back(std::abs(fd - exact));
        st.max_error[k] = std::max(st.max_error[k], e.back());
      }
      errs.push_back(e);
    }
  }
  st.min_order = std::numeric_limits<double>::infinity();
  st.max_order = -std::numeric_limits<double>::infinity();
  for (const auto& e : errs)
    for (std::size_t k = 0; k + 1 < e.size(); ++k) {
      const double p = std::log(e[k] / e[k + 1]) / std::log(st.deltas[k] / st.deltas[k + 1]);
      st.min_order = std::min(st.min_order, p);
      st.max_order = std::max(st.max_order, p);
    }
  return st;
}

inline CheckResult check_chemical_potential() {
  return checks::timed("chemical-potential gradient", [&] {
    const ChemicalPotentialStudy st = chemical_potential_study();
    const bool ok = st.min_order >= 0.8 && st.max_order <= 1.2 && st.max_error[0] > st.max_error[2];
    return CheckResult{"", ok,
                       "errors " + checks::sci(st.max_error[0]) + " / " + checks::sci(st.max_error[1]) + " / " +
                           checks::sci(st.max_error[2]) + ", order in [" + checks::sci(st.min_order) + ", " +
                           checks::sci(st.max_order) + "]",
                       0.0};
  });
}

// The suite behind `sepnp check`.
inline std::vector<std::function<CheckResult()>> property_suite() {
  return {
      [] { return check_degenerate_identity(); },
      [] { return check_entropy_roundtrip(); },
      [] { return check_flux_equivalence(); },
      [] { return check_jacobian(); },
      [] { return check_conservation(); },
      [] { return check_entropy_monotonicity(); },
      [] { return check_poisson_oracle(); },
      [] { return check_temporal_order(); },
      [] { return check_semimetric(); },
      [] { return check_chemical_potential(); },
  };
}

}  // namespace sepnp
