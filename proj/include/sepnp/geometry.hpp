#pragma once

// Grid, channel cross-section, confined oxygen and permanent charge of the
// one-dimensional area-weighted ion-channel model on (0,1).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "sepnp/errors.hpp"

namespace sepnp {

class Grid1D {
 public:
  explicit Grid1D(std::size_t n_cells) : n_cells_(n_cells) {
    if (n_cells < 2) throw DomainError("grid needs at least two cells");
    width_ = 1.0 / static_cast<double>(n_cells);
  }

  std::size_t n_cells() const noexcept { return n_cells_; }
  double cell_width() const noexcept { return width_; }
  double center(std::size_t m) const noexcept { return (static_cast<double>(m) + 0.5) * width_; }
  // Coordinate of edge e, e = 0..M (edge e separates cells e-1 and e).
  double edge(std::size_t e) const noexcept { return static_cast<double>(e) * width_; }

  std::vector<double> centers() const {
    std::vector<double> x(n_cells_);
    for (std::size_t m = 0; m < n_cells_; ++m) x[m] = center(m);
    return x;
  }

 private:
  std::size_t n_cells_;
  double width_;
};

namespace detail {
inline void check_unit_interval(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("coordinate outside [0,1]: " + std::to_string(x));
}
}  // namespace detail

// Channel radius: funnel narrowing to 0.08 on [0.4, 0.6].
inline double radius_at(double x) {
  detail::check_unit_interval(x);
  if (x < 0.4) return 0.48 - x;
  if (x <= 0.6) return 0.08;
  return x - 0.52;
}

inline double area_at(double x) {
  const double r = radius_at(x);
  return std::numbers::pi * r * r;
}

enum class OxygenVariant { None, Standard, Degenerate };

inline const char* to_string(OxygenVariant v) {
  switch (v) {
    case OxygenVariant::None: return "none";
    case OxygenVariant::Standard: return "standard";
    case OxygenVariant::Degenerate: return "degenerate";
  }
  return "?";
}

inline double oxygen_profile(double x, OxygenVariant variant) {
  detail::check_unit_interval(x);
  switch (variant) {
    case OxygenVariant::Standard: return (x > 0.45 && x < 0.55) ? 0.89 : 0.0;
    case OxygenVariant::Degenerate: return (x > 0.35 && x < 0.65) ? 0.81 : 0.0;
    case OxygenVariant::None: return 0.0;
  }
  return 0.0;
}

// Confined O^{-1/2} ions carry charge -u_O/2.
inline double permanent_charge(double x, OxygenVariant variant) { return -0.5 * oxygen_profile(x, variant); }

enum class AreaProfile { Channel, Uniform };

// Sampled geometry. Cell quantities are evaluated at cell centers, edge areas
// pointwise at the interface coordinates x = e h.
struct ChannelGeometry {
  AreaProfile profile = AreaProfile::Channel;
  OxygenVariant oxygen_variant = OxygenVariant::Standard;
  std::vector<double> cell_area;
  std::vector<double> edge_area;  // M+1 entries, boundary edges included
  std::vector<double> oxygen;     // u_O per cell
  std::vector<double> charge;     // f per cell
  double oxygen_left = 0.0;       // u_O seen by the ghost cells
  double oxygen_right = 0.0;

  static ChannelGeometry build(const Grid1D& grid, AreaProfile profile, OxygenVariant variant) {
    ChannelGeometry g;
    g.profile = profile;
    g.oxygen_variant = variant;
    const std::size_t cells = grid.n_cells();
    g.cell_area.resize(cells);
    g.oxygen.resize(cells);
    g.charge.resize(cells);
    g.edge_area.resize(cells + 1);
    auto area = [profile](double x) { return profile == AreaProfile::Channel ? area_at(x) : 1.0; };
    for (std::size_t m = 0; m < cells; ++m) {
      const double x = grid.center(m);
      g.cell_area[m] = area(x);
      g.oxygen[m] = oxygen_profile(x, variant);
      g.charge[m] = permanent_charge(x, variant);
    }
    for (std::size_t e = 0; e <= cells; ++e) g.edge_area[e] = area(grid.edge(e));
    g.oxygen_left = oxygen_profile(0.0, variant);
    g.oxygen_right = oxygen_profile(1.0, variant);
    return g;
  }

  std::size_t n_cells() const noexcept { return cell_area.size(); }
};

enum class BoundaryMode { Dirichlet, NoFlux };

// Bath data at both ends. In NoFlux mode the species see zero flux through the
// boundary edges while the potential keeps its Dirichlet values.
struct BoundarySpec {
  BoundaryMode mode = BoundaryMode::Dirichlet;
  std::vector<double> u_left;
  std::vector<double> u_right;
  double phi_left = 0.0;
  double phi_right = 0.0;

  void validate(std::size_t n_species) const {
    if (u_left.size() != n_species || u_right.size() != n_species)
      throw DimensionError("boundary concentrations must list every species");
    for (const auto* side : {&u_left, &u_right}) {
      double sum = 0.0;
      for (double v : *side) {
        if (!(v > 0.0)) throw DomainError("boundary concentrations must be strictly positive");
        sum += v;
      }
      if (!(sum < 1.0)) throw DomainError("boundary solvent fraction must be positive");
    }
    if (!std::isfinite(phi_left) || !std::isfinite(phi_right)) throw DomainError("boundary potential not finite");
  }
};

}  // namespace sepnp
