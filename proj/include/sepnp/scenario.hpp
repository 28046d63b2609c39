#pragma once

// Scenario presets for the calcium-selective channel and its degenerate variant.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sepnp/core_model.hpp"
#include "sepnp/errors.hpp"
#include "sepnp/geometry.hpp"

namespace sepnp {

enum class BoundaryClosure { FullCell, HalfCell };

inline const char* to_string(BoundaryClosure c) { return c == BoundaryClosure::FullCell ? "full-cell" : "half-cell"; }

struct DiscretizationOptions {
  // FullCell puts the Dirichlet ghost value one cell width away (the literal
  // three-point stencil); HalfCell puts it on the boundary itself.
  BoundaryClosure closure = BoundaryClosure::FullCell;
  // When off, the Poisson rows use unit areas: -(lambda^2/h) (Phi_{m+1} - 2 Phi_m + Phi_{m-1}) = h (sum z u + f).
  bool poisson_area_weighting = true;
};

enum class Preset { Calcium, Degenerate, Custom };

inline const char* to_string(Preset p) {
  switch (p) {
    case Preset::Calcium: return "calcium";
    case Preset::Degenerate: return "degenerate";
    case Preset::Custom: return "custom";
  }
  return "?";
}

inline std::optional<Preset> preset_from_string(const std::string& s) {
  if (s == "calcium") return Preset::Calcium;
  if (s == "degenerate") return Preset::Degenerate;
  if (s == "custom") return Preset::Custom;
  return std::nullopt;
}

struct ScenarioConfig {
  std::string name;
  PhysicalParams params;
  std::vector<SpeciesSpec> species;
  std::size_t n_cells = 100;
  AreaProfile area_profile = AreaProfile::Channel;
  OxygenVariant oxygen = OxygenVariant::Standard;
  BoundarySpec boundary;
  DiscretizationOptions discretization;
  double dt = 1e-3;
  double newton_tolerance = 1e-12;
  double steady_tolerance = 1e-13;
  double concentration_scale = 61.5;  // mol/l per unit volume fraction
  double thermal_voltage_mV = 25.85;  // k_B T / q at about 300 K
  // "external-unverified" when physical constants are placeholders rather than
  // values taken from the reference parameter table.
  std::string provenance = "external-unverified";

  Grid1D grid() const { return Grid1D(n_cells); }
  ChannelGeometry geometry() const { return ChannelGeometry::build(grid(), area_profile, oxygen); }

  void validate() const {
    if (species.empty()) throw ConfigError("species", "at least one species is required");
    if (params.n_species != species.size()) throw ConfigError("species", "n_species does not match species list");
    try {
      params.validate();
    } catch (const DomainError& e) {
      throw ConfigError("physics", e.what());
    }
    for (const auto& s : species) {
      try {
        s.validate();
      } catch (const DomainError& e) {
        throw ConfigError("species." + s.name, e.what());
      }
    }
    if (n_cells < 2) throw ConfigError("cells", "need at least two cells");
    if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
    if (!(newton_tolerance > 0.0)) throw ConfigError("newton.tol", "must be positive");
    if (!(steady_tolerance > 0.0)) throw ConfigError("steady_tol", "must be positive");
    if (!(concentration_scale > 0.0)) throw ConfigError("units.concentration_scale", "must be positive");
    if (!(thermal_voltage_mV > 0.0)) throw ConfigError("units.thermal_voltage_mV", "must be positive");
    try {
      boundary.validate(species.size());
    } catch (const Error& e) {
      throw ConfigError("boundary", e.what());
    }
  }

  // Potential in millivolts: beta * Phi is measured in thermal voltages.
  double potential_to_mV(double phi) const { return params.beta * phi * thermal_voltage_mV; }
};

// Fields left empty keep the preset's value.
struct ScenarioOverrides {
  std::optional<std::string> name;
  std::optional<double> beta;
  std::optional<double> lambda_sq;
  std::optional<std::vector<SpeciesSpec>> species;
  std::optional<std::size_t> n_cells;
  std::optional<AreaProfile> area_profile;
  std::optional<OxygenVariant> oxygen;
  std::optional<BoundaryMode> boundary_mode;
  std::optional<std::vector<double>> u_left;
  std::optional<std::vector<double>> u_right;
  std::optional<double> phi_left;
  std::optional<double> phi_right;
  std::optional<BoundaryClosure> closure;
  std::optional<bool> poisson_area_weighting;
  std::optional<double> dt;
  std::optional<double> newton_tolerance;
  std::optional<double> steady_tolerance;
  std::optional<double> concentration_scale;
  std::optional<double> thermal_voltage_mV;
  std::optional<std::string> provenance;
};

namespace presets {

// Placeholder physical constants. The reference parameter table is not part of
// the model description; these values are dimensionless stand-ins chosen to give
// physically plausible behavior and are flagged external-unverified.
inline constexpr double kBeta = 1.0;
inline constexpr double kLambdaSq = 1.2e-4;
inline constexpr double kDiffusivityCa = 0.792;
inline constexpr double kDiffusivityNa = 1.334;
inline constexpr double kDiffusivityCl = 2.032;
// Bath concentrations in mol/l, converted by the 61.5 mol/l reporting scale.
inline constexpr double kBathCa = 0.05;
inline constexpr double kBathNa = 0.1;
inline constexpr double kBathCl = 0.2;

}  // namespace presets

inline std::vector<SpeciesSpec> calcium_species() {
  return {
      {"Ca", presets::kDiffusivityCa, 2.0, {}},
      {"Na", presets::kDiffusivityNa, 1.0, {}},
      {"Cl", presets::kDiffusivityCl, -1.0, {}},
  };
}

inline ScenarioConfig build_scenario(Preset preset, const ScenarioOverrides& o = {}) {
  ScenarioConfig c;
  if (preset == Preset::Custom) {
    if (!o.species) throw ConfigError("species", "custom scenario requires a species list");
    if (!o.beta) throw ConfigError("physics.beta", "custom scenario requires beta");
    if (!o.lambda_sq) throw ConfigError("physics.lambda_sq", "custom scenario requires lambda_sq");
    if (!o.u_left || !o.u_right)
      throw ConfigError("boundary", "custom scenario requires boundary concentrations");
    c.name = "custom";
    c.area_profile = AreaProfile::Uniform;
    c.oxygen = OxygenVariant::None;
    c.provenance = "user";
  } else {
    c.name = to_string(preset);
    c.params.beta = presets::kBeta;
    c.params.lambda_sq = presets::kLambdaSq;
    c.species = calcium_species();
    c.area_profile = AreaProfile::Channel;
    c.oxygen = preset == Preset::Calcium ? OxygenVariant::Standard : OxygenVariant::Degenerate;
    const double scale = c.concentration_scale;
    c.boundary.u_left = {presets::kBathCa / scale, presets::kBathNa / scale, presets::kBathCl / scale};
    c.boundary.u_right = c.boundary.u_left;
    c.boundary.phi_left = 0.0;
    c.boundary.phi_right = 0.0;
  }

  if (o.name) c.name = *o.name;
  if (o.beta) c.params.beta = *o.beta;
  if (o.lambda_sq) c.params.lambda_sq = *o.lambda_sq;
  if (o.species) c.species = *o.species;
  if (o.n_cells) c.n_cells = *o.n_cells;
  if (o.area_profile) c.area_profile = *o.area_profile;
  if (o.oxygen) c.oxygen = *o.oxygen;
  if (o.boundary_mode) c.boundary.mode = *o.boundary_mode;
  if (o.u_left) c.boundary.u_left = *o.u_left;
  if (o.u_right) c.boundary.u_right = *o.u_right;
  if (o.phi_left) c.boundary.phi_left = *o.phi_left;
  if (o.phi_right) c.boundary.phi_right = *o.phi_right;
  if (o.closure) c.discretization.closure = *o.closure;
  if (o.poisson_area_weighting) c.discretization.poisson_area_weighting = *o.poisson_area_weighting;
  if (o.dt) c.dt = *o.dt;
  if (o.newton_tolerance) c.newton_tolerance = *o.newton_tolerance;
  if (o.steady_tolerance) c.steady_tolerance = *o.steady_tolerance;
  if (o.concentration_scale) c.concentration_scale = *o.concentration_scale;
  if (o.thermal_voltage_mV) c.thermal_voltage_mV = *o.thermal_voltage_mV;
  if (o.provenance) c.provenance = *o.provenance;
  c.params.n_species = c.species.size();
  c.validate();
  return c;
}

}  // namespace sepnp
