#pragma once

// Implicit-Euler finite-volume residual of the area-weighted size-exclusion PNP
// system with logarithmic-mean edge mobilities, and its analytic Jacobian.
//
// Unknowns are stored cell-major: for cell m the n concentrations u_{1..n,m}
// followed by the potential Phi_m. Edge e (e = 0..M) separates cell e-1 and
// cell e; edges 0 and M connect to ghost cells carrying the Dirichlet data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sepnp/banded.hpp"
#include "sepnp/core_model.hpp"
#include "sepnp/errors.hpp"
#include "sepnp/geometry.hpp"
#include "sepnp/scenario.hpp"

namespace sepnp {

// ---------------------------------------------------------------------------
// Logarithmic mean

struct LogMeanJet {
  double value = 0.0;
  double d_a = 0.0;
  double d_b = 0.0;
};

namespace detail {

// Below this |delta| = |b-a|/(a+b) the mean is evaluated from its Taylor series.
inline constexpr double kLogMeanSeriesThreshold = 1e-2;

// g(d) = d / atanh(d) and g'(d), so that Lambda(a,b) = mu g(delta) with mu = (a+b)/2.
inline void log_mean_shape(double d, double& g, double& dg) {
  if (std::abs(d) < kLogMeanSeriesThreshold) {
    const double d2 = d * d;
    g = 1.0 - d2 * (1.0 / 3.0 + d2 * (4.0 / 45.0 + d2 * (44.0 / 945.0 + d2 * (428.0 / 14175.0))));
    dg = -d * (2.0 / 3.0 + d2 * (16.0 / 45.0 + d2 * (264.0 / 945.0 + d2 * (3424.0 / 14175.0))));
    return;
  }
  const double at = std::atanh(d);
  g = d / at;
  dg = (at - d / (1.0 - d * d)) / (at * at);
}

}  // namespace detail

// (b-a)/(log b - log a); a when a == b; 0 when either argument is not positive.
// Negative arguments (Newton iterates) fall into the zero branch.
inline double log_mean(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) return 0.0;
  const double mu = 0.5 * (a + b);
  const double d = (b - a) / (a + b);
  double g = 0.0;
  double dg = 0.0;
  detail::log_mean_shape(d, g, dg);
  return mu * g;
}

// Checked variant for callers that want the nonnegativity precondition enforced.
inline double log_mean_checked(double a, double b) {
  if (a < 0.0 || b < 0.0) throw DomainError("log_mean needs nonnegative arguments");
  return log_mean(a, b);
}

inline LogMeanJet log_mean_jet(double a, double b) {
  LogMeanJet j;
  if (!(a > 0.0) || !(b > 0.0)) return j;
  const double mu = 0.5 * (a + b);
  const double d = (b - a) / (a + b);
  double g = 0.0;
  double dg = 0.0;
  detail::log_mean_shape(d, g, dg);
  j.value = mu * g;
  // d(delta)/da = -(1+delta)/(2 mu), d(delta)/db = (1-delta)/(2 mu)
  j.d_a = 0.5 * (g - (1.0 + d) * dg);
  j.d_b = 0.5 * (g + (1.0 - d) * dg);
  return j;
}

// ---------------------------------------------------------------------------
// Unknown vector

class UnknownVector {
 public:
  UnknownVector() = default;
  UnknownVector(std::size_t cells, std::size_t species)
      : cells_(cells), species_(species), data_(cells * (species + 1), 0.0) {}
  UnknownVector(std::size_t cells, std::size_t species, std::vector<double> data)
      : cells_(cells), species_(species), data_(std::move(data)) {
    if (data_.size() != cells_ * (species_ + 1)) throw DimensionError("unknown vector has wrong length");
  }

  std::size_t cells() const noexcept { return cells_; }
  std::size_t species() const noexcept { return species_; }
  std::size_t block() const noexcept { return species_ + 1; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t m, std::size_t i) const noexcept { return m * (species_ + 1) + i; }
  std::size_t phi_index(std::size_t m) const noexcept { return m * (species_ + 1) + species_; }

  double u(std::size_t m, std::size_t i) const noexcept { return data_[index(m, i)]; }
  double& u(std::size_t m, std::size_t i) noexcept { return data_[index(m, i)]; }
  double phi(std::size_t m) const noexcept { return data_[phi_index(m)]; }
  double& phi(std::size_t m) noexcept { return data_[phi_index(m)]; }
  std::span<const double> cell(std::size_t m) const noexcept {
    return std::span<const double>(data_).subspan(m * (species_ + 1), species_);
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  bool same_shape(const UnknownVector& o) const noexcept { return cells_ == o.cells_ && species_ == o.species_; }
  bool operator==(const UnknownVector&) const = default;

 private:
  std::size_t cells_ = 0;
  std::size_t species_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Discrete model

// Everything the residual needs, precomputed from a scenario.
struct DiscreteModel {
  std::size_t cells = 0;
  std::size_t species = 0;
  double h = 0.0;
  double beta = 1.0;
  double lambda_sq = 1.0;
  std::vector<double> diffusivity;
  std::vector<double> valence;
  BoundaryMode mode = BoundaryMode::Dirichlet;

  std::vector<double> cell_area;      // a_m, multiplies storage terms
  std::vector<double> oxygen;         // u_O per cell
  std::vector<double> charge;         // f_m
  std::vector<double> edge_area;      // a_e for species fluxes
  std::vector<double> edge_distance;  // d_e: h inside, h or h/2 at the boundary
  std::vector<double> poisson_edge;   // a_e/d_e or 1/d_e
  std::vector<double> poisson_cell;   // h a_m or h

  std::vector<double> ghost_left;  // Dirichlet concentrations
  std::vector<double> ghost_right;
  double ghost_solvent_left = 1.0;
  double ghost_solvent_right = 1.0;
  double phi_left = 0.0;
  double phi_right = 0.0;

  std::size_t block() const noexcept { return species + 1; }
  std::size_t unknowns() const noexcept { return cells * (species + 1); }

  static DiscreteModel from(const ScenarioConfig& sc) {
    sc.validate();
    const Grid1D grid = sc.grid();
    const ChannelGeometry geom = sc.geometry();
    DiscreteModel d;
    d.cells = grid.n_cells();
    d.species = sc.species.size();
    d.h = grid.cell_width();
    d.beta = sc.params.beta;
    d.lambda_sq = sc.params.lambda_sq;
    for (const auto& s : sc.species) {
      d.diffusivity.push_back(s.diffusivity);
      d.valence.push_back(s.valence);
    }
    d.mode = sc.boundary.mode;
    d.cell_area = geom.cell_area;
    d.oxygen = geom.oxygen;
    d.charge = geom.charge;
    d.edge_area = geom.edge_area;
    d.edge_distance.assign(d.cells + 1, d.h);
    if (sc.discretization.closure == BoundaryClosure::HalfCell) {
      d.edge_distance.front() = 0.5 * d.h;
      d.edge_distance.back() = 0.5 * d.h;
    }
    const bool weighted = sc.discretization.poisson_area_weighting;
    d.poisson_edge.resize(d.cells + 1);
    for (std::size_t e = 0; e <= d.cells; ++e)
      d.poisson_edge[e] = (weighted ? d.edge_area[e] : 1.0) / d.edge_distance[e];
    d.poisson_cell.resize(d.cells);
    for (std::size_t m = 0; m < d.cells; ++m) d.poisson_cell[m] = d.h * (weighted ? d.cell_area[m] : 1.0);

    d.ghost_left = sc.boundary.u_left;
    d.ghost_right = sc.boundary.u_right;
    d.ghost_solvent_left = 1.0 - geom.oxygen_left;
    d.ghost_solvent_right = 1.0 - geom.oxygen_right;
    for (double v : d.ghost_left) d.ghost_solvent_left -= v;
    for (double v : d.ghost_right) d.ghost_solvent_right -= v;
    d.phi_left = sc.boundary.phi_left;
    d.phi_right = sc.boundary.phi_right;
    return d;
  }

  double solvent(const UnknownVector& U, std::size_t m) const noexcept {
    double s = 1.0 - oxygen[m];
    for (std::size_t i = 0; i < species; ++i) s -= U.u(m, i);
    return s;
  }

  void check(const UnknownVector& U) const {
    if (U.cells() != cells || U.species() != species) throw DimensionError("unknown vector does not match model");
  }

  // Weights that make the discrete free energy consistent with the Poisson operator.
  FreeEnergyWeights free_energy_weights() const {
    FreeEnergyWeights w;
    w.cell_measure.resize(cells);
    for (std::size_t m = 0; m < cells; ++m) w.cell_measure[m] = h * cell_area[m];
    w.edge_conductance = poisson_edge;
    return w;
  }
};

// Values of one (possibly ghost) cell as seen by an edge.
struct CellView {
  std::span<const double> u;
  double solvent = 1.0;
  double phi = 0.0;
};

inline CellView cell_view(const DiscreteModel& model, const UnknownVector& U, std::size_t m) {
  return {U.cell(m), model.solvent(U, m), U.phi(m)};
}

inline CellView left_ghost(const DiscreteModel& model) {
  return {model.ghost_left, model.ghost_solvent_left, model.phi_left};
}

inline CellView right_ghost(const DiscreteModel& model) {
  return {model.ghost_right, model.ghost_solvent_right, model.phi_right};
}

// Two-point flux of species i across an edge of length `distance`, oriented
// from `left` to `right`:
//   (D_i/d) [ L(u_0) (u_i^R - u_i^L) - L(u_i) (u_0^R - u_0^L) + beta z_i L(u_i) L(u_0) (Phi^R - Phi^L) ]
// The edge area is applied by the caller.
inline double edge_flux(std::size_t i, const CellView& left, const CellView& right, double distance,
                        double diffusivity, double valence, double beta) {
  const double mi = log_mean(left.u[i], right.u[i]);
  const double m0 = log_mean(left.solvent, right.solvent);
  return diffusivity / distance *
         (m0 * (right.u[i] - left.u[i]) - mi * (right.solvent - left.solvent) +
          beta * valence * mi * m0 * (right.phi - left.phi));
}

namespace detail {

// log(b/a) for positive a, b.
inline double log_ratio(double a, double b) {
  const double d = b - a;
  return std::abs(d) < 0.5 * a ? std::log1p(d / a) : std::log(b / a);
}

}  // namespace detail

// Same flux written with entropy variables; valid for strictly positive states.
inline double edge_flux_entropy_form(std::size_t i, const CellView& left, const CellView& right, double distance,
                                     double diffusivity, double valence, double beta) {
  const double mi = log_mean(left.u[i], right.u[i]);
  const double m0 = log_mean(left.solvent, right.solvent);
  // w_R - w_L, with the log ratios taken through log1p for close neighbors.
  const double dw = detail::log_ratio(left.u[i], right.u[i]) - detail::log_ratio(left.solvent, right.solvent) +
                    beta * valence * (right.phi - left.phi);
  return diffusivity / distance * mi * m0 * dw;
}

// Flux of species i across interior edge e (1 <= e <= M-1), from cell e-1 to cell e.
inline double species_flux(std::size_t i, std::size_t e, const UnknownVector& U, const DiscreteModel& model) {
  model.check(U);
  if (e == 0 || e >= model.cells) throw DimensionError("species_flux expects an interior edge");
  return edge_flux(i, cell_view(model, U, e - 1), cell_view(model, U, e), model.edge_distance[e],
                   model.diffusivity[i], model.valence[i], model.beta);
}

namespace detail {

inline bool species_edge_open(const DiscreteModel& model, std::size_t e) {
  return model.mode == BoundaryMode::Dirichlet || (e > 0 && e < model.cells);
}

inline CellView edge_left(const DiscreteModel& model, const UnknownVector& U, std::size_t e) {
  return e == 0 ? left_ghost(model) : cell_view(model, U, e - 1);
}

inline CellView edge_right(const DiscreteModel& model, const UnknownVector& U, std::size_t e) {
  return e == model.cells ? right_ghost(model) : cell_view(model, U, e);
}

// Area-weighted flux a_e J_e, zero on closed boundary edges.
inline double weighted_flux(std::size_t i, std::size_t e, const UnknownVector& U, const DiscreteModel& model) {
  if (!species_edge_open(model, e)) return 0.0;
  return model.edge_area[e] * edge_flux(i, edge_left(model, U, e), edge_right(model, U, e),
                                        model.edge_distance[e], model.diffusivity[i], model.valence[i],
                                        model.beta);
}

}  // namespace detail

// -lambda^2 sum_e c_e (Phi_nb - Phi_m) - h a_m (sum_i z_i u_{i,m} + f_m)
inline double poisson_residual(std::size_t m, const UnknownVector& U, const DiscreteModel& model) {
  model.check(U);
  const double phi = U.phi(m);
  const double left = m == 0 ? model.phi_left : U.phi(m - 1);
  const double right = m + 1 == model.cells ? model.phi_right : U.phi(m + 1);
  double rho = model.charge[m];
  for (std::size_t i = 0; i < model.species; ++i) rho += model.valence[i] * U.u(m, i);
  return -model.lambda_sq * (model.poisson_edge[m + 1] * (right - phi) - model.poisson_edge[m] * (phi - left)) -
         model.poisson_cell[m] * rho;
}

// h a_m (u_{i,m} - u_{i,m}^prev)/dt - (a_{m+1/2} J_{i,m+1/2} - a_{m-1/2} J_{i,m-1/2})
inline double species_residual(std::size_t i, std::size_t m, const UnknownVector& U, const UnknownVector& U_prev,
                               double dt, const DiscreteModel& model) {
  model.check(U);
  model.check(U_prev);
  const double storage = model.h * model.cell_area[m] * (U.u(m, i) - U_prev.u(m, i)) / dt;
  return storage - (detail::weighted_flux(i, m + 1, U, model) - detail::weighted_flux(i, m, U, model));
}

inline std::vector<double> assemble_residual(const UnknownVector& U, const UnknownVector& U_prev, double dt,
                                             const DiscreteModel& model) {
  model.check(U);
  model.check(U_prev);
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const std::size_t n = model.species;
  std::vector<double> F(model.unknowns(), 0.0);
  for (std::size_t m = 0; m < model.cells; ++m) {
    const double storage = model.h * model.cell_area[m] / dt;
    for (std::size_t i = 0; i < n; ++i) F[U.index(m, i)] = storage * (U.u(m, i) - U_prev.u(m, i));
    F[U.phi_index(m)] = poisson_residual(m, U, model);
  }
  for (std::size_t e = 0; e <= model.cells; ++e) {
    for (std::size_t i = 0; i < n; ++i) {
      const double flux = detail::weighted_flux(i, e, U, model);
      if (e > 0) F[U.index(e - 1, i)] -= flux;
      if (e < model.cells) F[U.index(e, i)] += flux;
    }
  }
  return F;
}

// Jacobian dF/dU in block-tridiagonal form; `rhs` holds -F(U) for the Newton update.
inline SparseSystem assemble_jacobian(const UnknownVector& U, const UnknownVector& U_prev, double dt,
                                      const DiscreteModel& model) {
  const std::vector<double> F = assemble_residual(U, U_prev, dt, model);
  const std::size_t n = model.species;
  const std::size_t M = model.cells;
  SparseSystem sys(M, n + 1);
  auto& A = sys.matrix;
  for (std::size_t k = 0; k < F.size(); ++k) sys.rhs[k] = -F[k];

  for (std::size_t m = 0; m < M; ++m) {
    const double storage = model.h * model.cell_area[m] / dt;
    for (std::size_t i = 0; i < n; ++i) {
      A.add(U.index(m, i), U.index(m, i), storage);
      A.add(U.phi_index(m), U.index(m, i), -model.poisson_cell[m] * model.valence[i]);
    }
  }

  std::vector<double> dl(n), dr(n);  // d(flux)/d(u_j) on the left / right cell
  for (std::size_t e = 0; e <= M; ++e) {
    const bool has_left = e > 0;
    const bool has_right = e < M;
    const std::size_t L = e - 1;  // only used when has_left
    const std::size_t R = e;      // only used when has_right

    // Poisson coupling across this edge.
    const double c = model.lambda_sq * model.poisson_edge[e];
    if (has_left) {
      A.add(U.phi_index(L), U.phi_index(L), c);
      if (has_right) A.add(U.phi_index(L), U.phi_index(R), -c);
    }
    if (has_right) {
      A.add(U.phi_index(R), U.phi_index(R), c);
      if (has_left) A.add(U.phi_index(R), U.phi_index(L), -c);
    }

    if (!detail::species_edge_open(model, e)) continue;
    const CellView left = detail::edge_left(model, U, e);
    const CellView right = detail::edge_right(model, U, e);
    const LogMeanJet j0 = log_mean_jet(left.solvent, right.solvent);
    const double du0 = right.solvent - left.solvent;
    const double dphi = right.phi - left.phi;
    for (std::size_t i = 0; i < n; ++i) {
      const LogMeanJet ji = log_mean_jet(left.u[i], right.u[i]);
      const double dui = right.u[i] - left.u[i];
      const double scale = model.edge_area[e] * model.diffusivity[i] / model.edge_distance[e];
      const double bz = model.beta * model.valence[i];
      // Partials of the bracket. u_0 = 1 - sum u_j - u_O, so du_0/du_j = -1 for every j.
      for (std::size_t j = 0; j < n; ++j) {
        const double delta = i == j ? 1.0 : 0.0;
        const double dmi_l = delta * ji.d_a;
        const double dmi_r = delta * ji.d_b;
        const double dm0_l = -j0.d_a;
        const double dm0_r = -j0.d_b;
        dl[j] = scale * (dm0_l * dui - j0.value * delta - dmi_l * du0 - ji.value +
                         bz * dphi * (dmi_l * j0.value + ji.value * dm0_l));
        dr[j] = scale * (dm0_r * dui + j0.value * delta - dmi_r * du0 + ji.value +
                         bz * dphi * (dmi_r * j0.value + ji.value * dm0_r));
      }
      const double dphi_l = -scale * bz * ji.value * j0.value;
      const double dphi_r = -dphi_l;
      // Flux enters row (L, i) with sign -1 and row (R, i) with sign +1.
      if (has_left) {
        const std::size_t row = U.index(L, i);
        for (std::size_t j = 0; j < n; ++j) {
          A.add(row, U.index(L, j), -dl[j]);
          if (has_right) A.add(row, U.index(R, j), -dr[j]);
        }
        A.add(row, U.phi_index(L), -dphi_l);
        if (has_right) A.add(row, U.phi_index(R), -dphi_r);
      }
      if (has_right) {
        const std::size_t row = U.index(R, i);
        for (std::size_t j = 0; j < n; ++j) {
          if (has_left) A.add(row, U.index(L, j), dl[j]);
          A.add(row, U.index(R, j), dr[j]);
        }
        if (has_left) A.add(row, U.phi_index(L), dphi_l);
        A.add(row, U.phi_index(R), dphi_r);
      }
    }
  }
  return sys;
}

// Concentrations per cell as simplex points. Components in [-slack, 0) are
// rounded to zero; anything below -slack is an infeasible state.
inline std::vector<SimplexPoint> cell_points(const UnknownVector& U, const DiscreteModel& model,
                                             double slack = 1e-9) {
  model.check(U);
  std::vector<SimplexPoint> pts;
  pts.reserve(model.cells);
  for (std::size_t m = 0; m < model.cells; ++m) {
    std::vector<double> c(U.cell(m).begin(), U.cell(m).end());
    for (double& v : c) {
      if (v < -slack) throw InfeasibleStateError("negative concentration in cell " + std::to_string(m));
      v = std::max(v, 0.0);
    }
    double rest = 1.0 - model.oxygen[m];
    for (double v : c) rest -= v;
    if (rest < -slack) throw InfeasibleStateError("negative solvent fraction in cell " + std::to_string(m));
    rest = std::max(rest, 0.0);
    pts.push_back(SimplexPoint::with_solvent(std::move(c), model.oxygen[m], rest));
  }
  return pts;
}

inline std::vector<double> potentials(const UnknownVector& U) {
  std::vector<double> phi(U.cells());
  for (std::size_t m = 0; m < U.cells(); ++m) phi[m] = U.phi(m);
  return phi;
}

// Dirichlet reference: bath data interpolated linearly between the ghost
// positions, without confined oxygen, so that w^D is spatially constant when the
// two baths agree.
inline ReferenceState dirichlet_reference(const DiscreteModel& model) {
  ReferenceState ref;
  ref.role = ReferenceState::Role::Dirichlet;
  const double x_left = -0.5 * model.h + (model.edge_distance.front() < model.h ? 0.5 * model.h : 0.0);
  const double x_right = 1.0 + 0.5 * model.h - (model.edge_distance.back() < model.h ? 0.5 * model.h : 0.0);
  for (std::size_t m = 0; m < model.cells; ++m) {
    const double x = (static_cast<double>(m) + 0.5) * model.h;
    const double t = (x - x_left) / (x_right - x_left);
    std::vector<double> c(model.species);
    double sum = 0.0;
    for (std::size_t i = 0; i < model.species; ++i) {
      c[i] = (1.0 - t) * model.ghost_left[i] + t * model.ghost_right[i];
      sum += c[i];
    }
    ref.u.push_back(SimplexPoint::with_solvent(std::move(c), 0.0, 1.0 - sum));
    ref.phi.push_back((1.0 - t) * model.phi_left + t * model.phi_right);
  }
  return ref;
}

inline double free_energy(const UnknownVector& U, const ReferenceState& ref, const DiscreteModel& model,
                          std::span<const SpeciesSpec> species, const PhysicalParams& params) {
  const auto pts = cell_points(U, model);
  const auto phi = potentials(U);
  return free_energy(pts, phi, ref, model.free_energy_weights(), params, species);
}

}  // namespace sepnp
