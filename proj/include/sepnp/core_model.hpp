#pragma once

// Algebraic structure of the size-exclusion PNP model: simplex states, entropy
// variables and their explicit inverse, the discrete free energy and the
// Gajewski semimetric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sepnp/errors.hpp"

namespace sepnp {

inline constexpr double kSimplexTolerance = 1e-12;

struct SpeciesSpec {
  std::string name;
  double diffusivity = 1.0;
  double valence = 0.0;
  // Per-cell samples W_i; empty means W_i == 0.
  std::vector<double> external_potential;

  double external_potential_at(std::size_t cell) const {
    return external_potential.empty() ? 0.0 : external_potential.at(cell);
  }

  void validate() const {
    if (!(diffusivity > 0.0) || !std::isfinite(diffusivity))
      throw DomainError("species '" + name + "': diffusivity must be positive");
    if (!std::isfinite(valence)) throw DomainError("species '" + name + "': valence must be finite");
  }
};

struct PhysicalParams {
  double beta = 1.0;       // inverse thermal voltage
  double lambda_sq = 1.0;  // scaled permittivity
  std::size_t n_species = 1;

  void validate() const {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (!(lambda_sq > 0.0)) throw DomainError("lambda_sq must be positive");
    if (n_species < 1) throw DomainError("n_species must be at least 1");
  }
};

// A point of the closed simplex: n ion fractions, a confined (immobile) fraction
// u_O and the derived solvent fraction u_0 = 1 - sum(u_i) - u_O.
class SimplexPoint {
 public:
  SimplexPoint() = default;

  explicit SimplexPoint(std::vector<double> concentrations, double immobile_fraction = 0.0)
      : u_(std::move(concentrations)), immobile_(immobile_fraction) {
    check_components();
    const double rest = 1.0 - std::accumulate(u_.begin(), u_.end(), 0.0) - immobile_;
    if (rest < -kSimplexTolerance)
      throw InfeasibleStateError("sum of fractions exceeds one by " + std::to_string(-rest));
    solvent_ = std::clamp(rest, 0.0, 1.0);
  }

  // Builds a point whose solvent fraction is known more accurately than 1 - sum(u),
  // e.g. from the entropy-variable inversion where u_0 may be far below machine epsilon.
  static SimplexPoint with_solvent(std::vector<double> concentrations, double immobile_fraction,
                                   double solvent) {
    SimplexPoint p;
    p.u_ = std::move(concentrations);
    p.immobile_ = immobile_fraction;
    p.check_components();
    if (!(solvent >= 0.0 && solvent <= 1.0)) throw InfeasibleStateError("solvent fraction outside [0,1]");
    const double total = std::accumulate(p.u_.begin(), p.u_.end(), 0.0) + immobile_fraction + solvent;
    if (std::abs(total - 1.0) > kSimplexTolerance)
      throw InfeasibleStateError("fractions do not sum to one");
    p.solvent_ = solvent;
    return p;
  }

  std::size_t size() const noexcept { return u_.size(); }
  std::span<const double> concentrations() const noexcept { return u_; }
  double operator[](std::size_t i) const { return u_[i]; }
  double immobile_fraction() const noexcept { return immobile_; }
  double solvent() const noexcept { return solvent_; }

  bool strictly_interior() const noexcept {
    return solvent_ > 0.0 && std::all_of(u_.begin(), u_.end(), [](double v) { return v > 0.0; });
  }

 private:
  void check_components() const {
    if (u_.empty()) throw DimensionError("simplex point needs at least one species");
    for (double v : u_) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw InfeasibleStateError("concentration outside [0,1]: " + std::to_string(v));
    }
    if (!std::isfinite(immobile_) || immobile_ < 0.0 || immobile_ >= 1.0)
      throw InfeasibleStateError("immobile fraction outside [0,1)");
  }

  std::vector<double> u_;
  double immobile_ = 0.0;
  double solvent_ = 1.0;
};

struct EntropyPoint {
  std::vector<double> w;
};

// Reference data for free energies: either the Dirichlet extension (u^D, Phi^D)
// or a computed steady state (u^inf, Phi^inf). One entry per cell.
struct ReferenceState {
  enum class Role { Dirichlet, Steady };

  std::vector<SimplexPoint> u;
  std::vector<double> phi;
  Role role = Role::Dirichlet;
};

inline double solvent_fraction(const SimplexPoint& p) noexcept { return p.solvent(); }

// w_i = log(u_i/u_0) + beta z_i phi + W_i
inline EntropyPoint entropy_variables(const SimplexPoint& p, double phi, const PhysicalParams& params,
                                      std::span<const SpeciesSpec> species,
                                      std::span<const double> w_here = {}) {
  if (species.size() != p.size()) throw DimensionError("species list does not match state size");
  if (!w_here.empty() && w_here.size() != p.size()) throw DimensionError("external potential size mismatch");
  if (!p.strictly_interior()) throw DomainError("entropy variables need a strictly interior state");
  const double log_u0 = std::log(p.solvent());
  EntropyPoint out;
  out.w.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double ext = w_here.empty() ? 0.0 : w_here[i];
    out.w[i] = std::log(p[i]) - log_u0 + params.beta * species[i].valence * phi + ext;
  }
  return out;
}

// Inverse of entropy_variables on the oxygen-free simplex. The exponents are
// shifted by their maximum (including the solvent's zero exponent) before use.
inline SimplexPoint invert_entropy_variables(const EntropyPoint& w, double phi, const PhysicalParams& params,
                                             std::span<const SpeciesSpec> species,
                                             std::span<const double> w_here = {}) {
  const std::size_t n = w.w.size();
  if (species.size() != n) throw DimensionError("species list does not match entropy point size");
  if (!w_here.empty() && w_here.size() != n) throw DimensionError("external potential size mismatch");
  std::vector<double> expo(n);
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ext = w_here.empty() ? 0.0 : w_here[i];
    expo[i] = w.w[i] - params.beta * species[i].valence * phi - ext;
    if (!std::isfinite(expo[i])) throw DomainError("non-finite entropy variable");
    shift = std::max(shift, expo[i]);
  }
  const double solvent_term = std::exp(-shift);
  double denom = solvent_term;
  for (double& e : expo) {
    e = std::exp(e - shift);
    denom += e;
  }
  for (double& e : expo) e /= denom;
  return SimplexPoint::with_solvent(std::move(expo), 0.0, solvent_term / denom);
}

namespace detail {

// (1+t) log(1+t) - t, accurate near t = 0.
inline double relative_entropy_kernel(double t) {
  if (std::abs(t) < 1e-2) {
    double term = t * t;
    double sum = 0.0;
    for (int k = 2; k <= 10; ++k) {
      sum += ((k % 2 == 0) ? 1.0 : -1.0) * term / (k * (k - 1.0));
      term *= t;
    }
    return sum;
  }
  return (1.0 + t) * std::log1p(t) - t;
}

}  // namespace detail

// int_c^u log(s/c) ds = u log(u/c) - u + c, with 0 log 0 = 0.
inline double mixing_entropy_term(double u, double c) {
  if (!(c > 0.0)) throw DomainError("reference fraction must be positive");
  if (u <= 0.0) return c;
  return c * detail::relative_entropy_kernel(u / c - 1.0);
}

// sum_{i=0}^n int_{c_i}^{u_i} log(s/c_i) ds for one cell, species 0 being the solvent.
inline double mixing_entropy(const SimplexPoint& u, const SimplexPoint& ref) {
  if (u.size() != ref.size()) throw DimensionError("state and reference differ in species count");
  double sum = mixing_entropy_term(u.solvent(), ref.solvent());
  for (std::size_t i = 0; i < u.size(); ++i) sum += mixing_entropy_term(u[i], ref[i]);
  return sum;
}

// Quadrature data for the discrete free energy. `edge_conductance` has one entry
// per edge (M+1, both boundary edges included) and equals a_e / d_e, the same
// weights the discrete Poisson operator uses. Ghost values of Phi - Phi^ref are zero.
struct FreeEnergyWeights {
  std::vector<double> cell_measure;
  std::vector<double> edge_conductance;
};

struct FreeEnergyParts {
  double mixing = 0.0;
  double electrostatic = 0.0;
  double external = 0.0;
  double total() const noexcept { return mixing + electrostatic + external; }
};

inline FreeEnergyParts free_energy_parts(std::span<const SimplexPoint> states, std::span<const double> phi,
                                         const ReferenceState& ref, const FreeEnergyWeights& weights,
                                         const PhysicalParams& params, std::span<const SpeciesSpec> species) {
  const std::size_t cells = states.size();
  if (phi.size() != cells || ref.u.size() != cells || ref.phi.size() != cells ||
      weights.cell_measure.size() != cells || weights.edge_conductance.size() != cells + 1)
    throw DimensionError("free energy inputs disagree in cell count");
  FreeEnergyParts parts;
  for (std::size_t m = 0; m < cells; ++m) {
    const double measure = weights.cell_measure[m];
    parts.mixing += measure * mixing_entropy(states[m], ref.u[m]);
    double ext = 0.0;
    for (std::size_t i = 0; i < species.size(); ++i) ext += states[m][i] * species[i].external_potential_at(m);
    parts.external += measure * ext;
  }
  double grad = 0.0;
  double left = 0.0;
  for (std::size_t e = 0; e <= cells; ++e) {
    const double right = e < cells ? phi[e] - ref.phi[e] : 0.0;
    grad += weights.edge_conductance[e] * (right - left) * (right - left);
    left = right;
  }
  parts.electrostatic = 0.5 * params.beta * params.lambda_sq * grad;
  return parts;
}

inline double free_energy(std::span<const SimplexPoint> states, std::span<const double> phi,
                          const ReferenceState& ref, const FreeEnergyWeights& weights,
                          const PhysicalParams& params, std::span<const SpeciesSpec> species) {
  return free_energy_parts(states, phi, ref, weights, params, species).total();
}

// Both sides of
//   sum_i u_i u_0 |grad log(u_i/u_0)|^2 = 4 u_0 sum_i |grad sqrt(u_i)|^2 + |grad u_0|^2 + 4 |grad sqrt(u_0)|^2
// with grad u_0 = -sum_i grad u_i. The identity is exact only for u_O = 0; with a
// constant confined fraction the left side is smaller by u_O |grad u_0|^2 / u_0.
inline std::pair<double, double> degenerate_identity_sides(const SimplexPoint& p, std::span<const double> grad_u) {
  if (grad_u.size() != p.size()) throw DimensionError("gradient size does not match state");
  if (!p.strictly_interior()) throw DomainError("identity needs a strictly interior state");
  const double u0 = p.solvent();
  double grad_u0 = 0.0;
  for (double g : grad_u) grad_u0 -= g;

  double lhs = 0.0;
  double sqrt_sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dlog = grad_u[i] / p[i] - grad_u0 / u0;
    lhs += p[i] * u0 * dlog * dlog;
    const double dsqrt = grad_u[i] / (2.0 * std::sqrt(p[i]));
    sqrt_sum += dsqrt * dsqrt;
  }
  const double dsqrt0 = grad_u0 / (2.0 * std::sqrt(u0));
  const double rhs = 4.0 * u0 * sqrt_sum + grad_u0 * grad_u0 + 4.0 * dsqrt0 * dsqrt0;
  return {lhs, rhs};
}

// h_eps(s) = (s+eps)(log(s+eps)-1)+1, with 0 log 0 = 0.
inline double regularized_entropy_density(double s, double eps) {
  const double x = s + eps;
  if (x <= 0.0) return 1.0;
  return x * (std::log(x) - 1.0) + 1.0;
}

// d_eps(u,v) = sum_m weight_m sum_{i=1}^n [h_eps(u_i) + h_eps(v_i) - 2 h_eps((u_i+v_i)/2)]
inline double gajewski_semimetric(std::span<const SimplexPoint> u, std::span<const SimplexPoint> v, double eps,
                                  std::span<const double> weights) {
  if (u.size() != v.size() || u.size() != weights.size())
    throw DimensionError("semimetric inputs live on different grids");
  if (!(eps >= 0.0)) throw DomainError("eps must be nonnegative");
  double sum = 0.0;
  for (std::size_t m = 0; m < u.size(); ++m) {
    if (u[m].size() != v[m].size()) throw DimensionError("species count mismatch in semimetric");
    double cell = 0.0;
    for (std::size_t i = 0; i < u[m].size(); ++i) {
      const double a = u[m][i];
      const double b = v[m][i];
      cell += regularized_entropy_density(a, eps) + regularized_entropy_density(b, eps) -
              2.0 * regularized_entropy_density(0.5 * (a + b), eps);
    }
    // Convexity makes each bracket nonnegative; clear rounding noise around zero.
    sum += weights[m] * std::max(cell, 0.0);
  }
  return sum;
}

}  // namespace sepnp
