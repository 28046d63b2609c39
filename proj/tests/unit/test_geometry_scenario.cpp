#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sepnp/geometry.hpp"
#include "sepnp/scenario.hpp"

using namespace sepnp;

TEST(Radius, PiecewiseLinearFunnel) {
  EXPECT_NEAR(radius_at(0.2), 0.28, 1e-15);
  EXPECT_NEAR(radius_at(0.5), 0.08, 1e-15);
  EXPECT_NEAR(radius_at(0.8), 0.28, 1e-15);
  EXPECT_NEAR(radius_at(0.0), 0.48, 1e-15);
  EXPECT_NEAR(radius_at(1.0), 0.48, 1e-15);
}

TEST(Radius, ContinuousAndBoundedBelow) {
  for (int k = 0; k <= 10000; ++k) {
    const double x = k / 10000.0;
    ASSERT_GE(radius_at(x), 0.08 - 1e-15);
  }
  EXPECT_NEAR(radius_at(0.4 - 1e-12), radius_at(0.4), 1e-11);
  EXPECT_NEAR(radius_at(0.6 + 1e-12), radius_at(0.6), 1e-11);
}

TEST(Radius, OutsideUnitIntervalThrows) {
  EXPECT_THROW(radius_at(-0.1), DomainError);
  EXPECT_THROW(radius_at(1.5), DomainError);
}

TEST(Area, CircularCrossSection) {
  EXPECT_NEAR(area_at(0.5), 0.0201062, 1e-7);
  EXPECT_NEAR(area_at(0.2), 0.2463009, 1e-7);
  EXPECT_NEAR(area_at(0.5), std::numbers::pi * 0.0064, 1e-16);
}

TEST(Oxygen, Profiles) {
  EXPECT_EQ(oxygen_profile(0.5, OxygenVariant::Standard), 0.89);
  EXPECT_EQ(oxygen_profile(0.3, OxygenVariant::Standard), 0.0);
  EXPECT_EQ(oxygen_profile(0.5, OxygenVariant::Degenerate), 0.81);
  EXPECT_EQ(oxygen_profile(0.4, OxygenVariant::Degenerate), 0.81);
  EXPECT_EQ(oxygen_profile(0.4, OxygenVariant::Standard), 0.0);
  EXPECT_EQ(oxygen_profile(0.5, OxygenVariant::None), 0.0);
}

TEST(PermanentCharge, HalfTheOxygen) {
  EXPECT_NEAR(permanent_charge(0.5, OxygenVariant::Standard), -0.445, 1e-15);
  EXPECT_EQ(permanent_charge(0.1, OxygenVariant::Standard), 0.0);
  EXPECT_NEAR(permanent_charge(0.5, OxygenVariant::Degenerate), -0.405, 1e-15);
}

TEST(Grid, MeasureSumsToOne) {
  for (std::size_t M : {2u, 7u, 100u, 1000u}) {
    const Grid1D g(M);
    double s = 0.0;
    for (std::size_t m = 0; m < M; ++m) s += g.cell_width();
    EXPECT_NEAR(s, 1.0, 1e-15 * static_cast<double>(M));
    EXPECT_NEAR(g.center(0), 0.5 / static_cast<double>(M), 1e-16);
    EXPECT_EQ(g.edge(M), 1.0);
  }
  EXPECT_THROW(Grid1D(1), DomainError);
}

TEST(ChannelGeometry, CellwiseChargeIdentityAndSampling) {
  const Grid1D grid(100);
  const auto g = ChannelGeometry::build(grid, AreaProfile::Channel, OxygenVariant::Standard);
  std::size_t oxygen_cells = 0;
  for (std::size_t m = 0; m < 100; ++m) {
    EXPECT_EQ(g.charge[m], -0.5 * g.oxygen[m]);
    if (g.oxygen[m] > 0.0) {
      ++oxygen_cells;
      EXPECT_GE(m, 45u);
      EXPECT_LE(m, 54u);
    }
  }
  EXPECT_EQ(oxygen_cells, 10u);
  EXPECT_EQ(g.oxygen_left, 0.0);
  EXPECT_EQ(g.oxygen_right, 0.0);
}

TEST(ChannelGeometry, DegenerateOxygenSpansThirtyCells) {
  const auto g = ChannelGeometry::build(Grid1D(100), AreaProfile::Channel, OxygenVariant::Degenerate);
  std::size_t count = 0;
  for (double o : g.oxygen) count += o > 0.0;
  EXPECT_EQ(count, 30u);
}

TEST(ChannelGeometry, EdgeAreasArePointwiseAtInterfaces) {
  const Grid1D grid(20);
  const auto g = ChannelGeometry::build(grid, AreaProfile::Channel, OxygenVariant::None);
  ASSERT_EQ(g.edge_area.size(), 21u);
  for (std::size_t e = 0; e <= 20; ++e) EXPECT_DOUBLE_EQ(g.edge_area[e], area_at(grid.edge(e)));
  for (std::size_t m = 0; m < 20; ++m) EXPECT_DOUBLE_EQ(g.cell_area[m], area_at(grid.center(m)));
}

TEST(ChannelGeometry, UniformProfileHasUnitAreas) {
  const auto g = ChannelGeometry::build(Grid1D(10), AreaProfile::Uniform, OxygenVariant::None);
  for (double a : g.cell_area) EXPECT_EQ(a, 1.0);
  for (double a : g.edge_area) EXPECT_EQ(a, 1.0);
}

TEST(BoundarySpec, Validation) {
  BoundarySpec b;
  b.u_left = {0.1, 0.2};
  b.u_right = {0.1, 0.2};
  EXPECT_NO_THROW(b.validate(2));
  EXPECT_THROW(b.validate(3), DimensionError);
  b.u_right = {0.6, 0.5};
  EXPECT_THROW(b.validate(2), DomainError);
  b.u_right = {0.0, 0.2};
  EXPECT_THROW(b.validate(2), DomainError);
}

TEST(BuildScenario, CalciumPreset) {
  const ScenarioConfig sc = build_scenario(Preset::Calcium);
  ASSERT_EQ(sc.species.size(), 3u);
  EXPECT_EQ(sc.species[0].valence, 2.0);
  EXPECT_EQ(sc.species[1].valence, 1.0);
  EXPECT_EQ(sc.species[2].valence, -1.0);
  EXPECT_EQ(sc.dt, 0.001);
  EXPECT_EQ(sc.n_cells, 100u);
  EXPECT_EQ(sc.oxygen, OxygenVariant::Standard);
  EXPECT_EQ(sc.area_profile, AreaProfile::Channel);
  EXPECT_EQ(sc.provenance, "external-unverified");
  EXPECT_EQ(sc.discretization.closure, BoundaryClosure::FullCell);
  EXPECT_TRUE(sc.discretization.poisson_area_weighting);
  for (const auto& s : sc.species) EXPECT_TRUE(s.external_potential.empty());
  // Bath concentrations in mol/l divided by the reporting scale.
  EXPECT_NEAR(sc.boundary.u_left[0] * sc.concentration_scale, 0.05, 1e-15);
}

TEST(BuildScenario, DegeneratePresetDiffersOnlyInOxygen) {
  const ScenarioConfig a = build_scenario(Preset::Calcium);
  const ScenarioConfig b = build_scenario(Preset::Degenerate);
  EXPECT_EQ(b.oxygen, OxygenVariant::Degenerate);
  EXPECT_EQ(a.params.lambda_sq, b.params.lambda_sq);
  EXPECT_EQ(a.boundary.u_left, b.boundary.u_left);
}

TEST(BuildScenario, OverridesApply) {
  ScenarioOverrides o;
  o.n_cells = 40;
  o.dt = 0.01;
  o.boundary_mode = BoundaryMode::NoFlux;
  o.closure = BoundaryClosure::HalfCell;
  const ScenarioConfig sc = build_scenario(Preset::Calcium, o);
  EXPECT_EQ(sc.n_cells, 40u);
  EXPECT_EQ(sc.dt, 0.01);
  EXPECT_EQ(sc.boundary.mode, BoundaryMode::NoFlux);
  EXPECT_EQ(sc.discretization.closure, BoundaryClosure::HalfCell);
}

TEST(BuildScenario, CustomWithoutSpeciesIsConfigError) {
  try {
    build_scenario(Preset::Custom);
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "species");
  }
}

TEST(BuildScenario, InvalidOverridesNameTheKey) {
  ScenarioOverrides o;
  o.dt = -1.0;
  try {
    build_scenario(Preset::Calcium, o);
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "dt");
  }
}

TEST(BuildScenario, PotentialInMillivolts) {
  const ScenarioConfig sc = build_scenario(Preset::Calcium);
  EXPECT_NEAR(sc.potential_to_mV(1.0), sc.params.beta * sc.thermal_voltage_mV, 1e-15);
}

TEST(Presets, NamesRoundTrip) {
  for (Preset p : {Preset::Calcium, Preset::Degenerate, Preset::Custom}) EXPECT_EQ(*preset_from_string(to_string(p)), p);
  EXPECT_FALSE(preset_from_string("nonsense").has_value());
}
