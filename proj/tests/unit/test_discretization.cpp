#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sepnp/checks.hpp"
#include "sepnp/discretization.hpp"
#include "sepnp/solver.hpp"

using namespace sepnp;

namespace {

// Uniform tube, no oxygen, the given species at equal bath values.
ScenarioConfig tube(std::vector<SpeciesSpec> species, std::vector<double> bath, std::size_t cells,
                    double phi_left = 0.0, double phi_right = 0.0, double lambda_sq = 1.0) {
  ScenarioOverrides o;
  o.species = std::move(species);
  o.beta = 1.0;
  o.lambda_sq = lambda_sq;
  o.u_left = bath;
  o.u_right = bath;
  o.phi_left = phi_left;
  o.phi_right = phi_right;
  o.n_cells = cells;
  return build_scenario(Preset::Custom, o);
}

UnknownVector constant_state(const DiscreteModel& model, const std::vector<double>& u, double phi) {
  UnknownVector U(model.cells, model.species);
  for (std::size_t m = 0; m < model.cells; ++m) {
    for (std::size_t i = 0; i < model.species; ++i) U.u(m, i) = u[i];
    U.phi(m) = phi;
  }
  return U;
}

}  // namespace

TEST(LogMean, Examples) {
  EXPECT_EQ(log_mean(2.0, 2.0), 2.0);
  EXPECT_NEAR(log_mean(1.0, std::numbers::e), std::numbers::e - 1.0, 1e-15);
  EXPECT_EQ(log_mean(0.5, 0.0), 0.0);
  EXPECT_EQ(log_mean(0.0, 0.5), 0.0);
  EXPECT_EQ(log_mean(-0.1, 0.5), 0.0);
  EXPECT_THROW(log_mean_checked(-0.1, 0.5), DomainError);
}

TEST(LogMean, SymmetricAndBetweenGeometricAndArithmetic) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ex(-12.0, 0.0);
  for (int s = 0; s < 20000; ++s) {
    const double a = std::pow(10.0, ex(rng));
    const double b = s % 4 == 0 ? a * (1.0 + 1e-9 * ex(rng)) : std::pow(10.0, ex(rng));
    const double L = log_mean(a, b);
    ASSERT_EQ(L, log_mean(b, a));
    ASSERT_GE(L, std::sqrt(a * b) * (1.0 - 1e-14));
    ASSERT_LE(L, 0.5 * (a + b) * (1.0 + 1e-14));
    ASSERT_GE(L, std::min(a, b) * (1.0 - 1e-14));
  }
}

TEST(LogMean, SeriesBranchMatchesClosedForm) {
  for (double d : {1e-3, 5e-3, 9.9e-3, 1.01e-2, 2e-2}) {
    const double a = 0.3, b = a * (1.0 + d) / (1.0 - d);
    const double closed = (b - a) / std::log1p((b - a) / a);
    EXPECT_NEAR(log_mean(a, b), closed, 1e-14 * closed);
  }
}

TEST(LogMean, MonotoneInEachArgument) {
  double prev = 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const double L = log_mean(0.3, 1e-3 * k);
    ASSERT_GT(L, prev);
    prev = L;
  }
}

TEST(LogMean, JetMatchesClosedFormPartials) {
  for (auto [a, b] : {std::pair{0.2, 0.3}, {1e-6, 0.5}, {0.4, 0.4 + 1e-7}, {0.7, 0.1}}) {
    const LogMeanJet j = log_mean_jet(a, b);
    EXPECT_NEAR(j.value, log_mean(a, b), 1e-16);
    const double L = j.value;
    if (std::abs(b - a) > 1e-6) {
      EXPECT_NEAR(j.d_a, L / (b - a) * (L / a - 1.0), 1e-10 * std::max(1.0, std::abs(j.d_a)));
      EXPECT_NEAR(j.d_b, L / (a - b) * (L / b - 1.0), 1e-10 * std::max(1.0, std::abs(j.d_b)));
    } else {
      EXPECT_NEAR(j.d_a, 0.5, 1e-6);
      EXPECT_NEAR(j.d_b, 0.5, 1e-6);
    }
  }
}

TEST(EdgeFlux, ZeroForEqualNeighbors) {
  const std::vector<double> u = {0.2, 0.1};
  const CellView c{u, 0.7, 0.3};
  EXPECT_EQ(edge_flux(0, c, c, 0.1, 1.0, 2.0, 1.0), 0.0);
  EXPECT_EQ(edge_flux(1, c, c, 0.1, 1.0, -1.0, 1.0), 0.0);
}

TEST(EdgeFlux, HandEvaluation) {
  const std::vector<double> ul = {0.2}, ur = {0.3};
  const CellView left{ul, 0.8, 0.0}, right{ur, 0.7, 0.0};
  const double l1 = 0.1 / std::log(1.5), l0 = 0.1 / std::log(8.0 / 7.0);
  EXPECT_NEAR(log_mean(0.2, 0.3), l1, 1e-15);
  EXPECT_NEAR(log_mean(0.8, 0.7), l0, 1e-15);
  EXPECT_NEAR(l1, 0.2466303, 1e-7);
  EXPECT_NEAR(l0, 0.7488876, 1e-7);
  const double expected = 10.0 * (l0 * 0.1 + l1 * 0.1);
  EXPECT_NEAR(expected, 0.9955179, 1e-7);
  EXPECT_NEAR(edge_flux(0, left, right, 0.1, 1.0, 1.0, 1.0), expected, 1e-15);
  // w jump log(0.3/0.7) - log(0.2/0.8)
  const double dw = std::log(0.3 / 0.7) - std::log(0.2 / 0.8);
  EXPECT_NEAR(dw, 0.5389965, 1e-7);
  EXPECT_NEAR(edge_flux_entropy_form(0, left, right, 0.1, 1.0, 1.0, 1.0), 10.0 * l1 * l0 * dw, 1e-15);
  EXPECT_NEAR(10.0 * l1 * l0 * dw, expected, 1e-15);
}

TEST(EdgeFlux, Antisymmetric) {
  std::mt19937_64 rng(4);
  for (int s = 0; s < 1000; ++s) {
    const auto a = checks::random_simplex(rng, 3), b = checks::random_simplex(rng, 3);
    const std::vector<double> ua(a.begin(), a.end() - 1), ub(b.begin(), b.end() - 1);
    const CellView l{ua, a.back(), checks::uniform(rng, -1, 1)}, r{ub, b.back(), checks::uniform(rng, -1, 1)};
    for (std::size_t i = 0; i < 3; ++i) {
      const double f = edge_flux(i, l, r, 0.05, 1.3, 2.0, 1.0);
      ASSERT_NEAR(f, -edge_flux(i, r, l, 0.05, 1.3, 2.0, 1.0), 1e-13 * std::max(1.0, std::abs(f)));
    }
  }
}

TEST(EdgeFlux, EntropyFormEquivalence) {
  const CheckResult r = check_flux_equivalence();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PoissonResidual, ConstantPotentialIsHarmonic) {
  const auto sc = tube({{"n", 1.0, 0.0, {}}}, {0.2}, 12, 0.7, 0.7);
  const auto model = DiscreteModel::from(sc);
  const UnknownVector U = constant_state(model, {0.2}, 0.7);
  for (std::size_t m = 0; m < model.cells; ++m) EXPECT_NEAR(poisson_residual(m, U, model), 0.0, 1e-15);
}

TEST(PoissonResidual, LinearPotentialIsDiscreteHarmonicInside) {
  const auto sc = tube({{"n", 1.0, 0.0, {}}}, {0.2}, 10, 1.0, -1.0);
  const auto model = DiscreteModel::from(sc);
  UnknownVector U = constant_state(model, {0.2}, 0.0);
  for (std::size_t m = 0; m < model.cells; ++m) U.phi(m) = 1.0 - 2.0 * (static_cast<double>(m) + 0.5) * model.h;
  for (std::size_t m = 1; m + 1 < model.cells; ++m) EXPECT_NEAR(poisson_residual(m, U, model), 0.0, 1e-13);
}

TEST(PoissonResidual, MatchesDenseOracleAndParabola) {
  const CheckResult r = check_poisson_oracle();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(SpeciesResidual, StationaryUniformStateNoFlux) {
  auto sc = tube({{"a", 1.0, 1.0, {}}, {"b", 2.0, -1.0, {}}}, {0.1, 0.1}, 20);
  sc.boundary.mode = BoundaryMode::NoFlux;
  const auto model = DiscreteModel::from(sc);
  const UnknownVector U = constant_state(model, {0.1, 0.1}, 0.0);
  for (double v : assemble_residual(U, U, 1e-3, model)) EXPECT_EQ(v, 0.0);
}

TEST(SpeciesResidual, NoTimeTermGivesMinusFluxDifference) {
  const auto sc = build_scenario(Preset::Calcium, [] {
    ScenarioOverrides o;
    o.n_cells = 16;
    return o;
  }());
  const auto model = DiscreteModel::from(sc);
  checks::Rng rng(9);
  const UnknownVector U = checks::random_interior_state(rng, model);
  for (std::size_t m = 1; m + 1 < model.cells; ++m)
    for (std::size_t i = 0; i < model.species; ++i) {
      const double expected = -(model.edge_area[m + 1] * species_flux(i, m + 1, U, model) -
                                model.edge_area[m] * species_flux(i, m, U, model));
      EXPECT_NEAR(species_residual(i, m, U, U, 1e-3, model), expected, 1e-15 * std::max(1.0, std::abs(expected)));
    }
}

// u = 0.2 + 0.1 sin(2 pi x), Phi = cos(pi x), one monovalent species, unit areas:
// J = u' + u (1-u) Phi', and the residual at U = U_prev is -h J' + O(h^3).
TEST(SpeciesResidual, ManufacturedSecondOrderConsistency) {
  const double pi = std::numbers::pi;
  auto u = [&](double x) { return 0.2 + 0.1 * std::sin(2 * pi * x); };
  auto du = [&](double x) { return 0.2 * pi * std::cos(2 * pi * x); };
  auto ddu = [&](double x) { return -0.4 * pi * pi * std::sin(2 * pi * x); };
  auto dphi = [&](double x) { return -pi * std::sin(pi * x); };
  auto ddphi = [&](double x) { return -pi * pi * std::cos(pi * x); };
  auto dJ = [&](double x) {
    const double v = u(x);
    return ddu(x) + du(x) * (1.0 - 2.0 * v) * dphi(x) + v * (1.0 - v) * ddphi(x);
  };

  std::vector<double> errors;
  for (std::size_t M : {50u, 100u, 200u}) {
    const auto sc = tube({{"p", 1.0, 1.0, {}}}, {0.2}, M);
    const auto model = DiscreteModel::from(sc);
    UnknownVector U(M, 1);
    for (std::size_t m = 0; m < M; ++m) {
      const double x = (static_cast<double>(m) + 0.5) * model.h;
      U.u(m, 0) = u(x);
      U.phi(m) = std::cos(pi * x);
    }
    double e = 0.0;
    for (std::size_t m = 1; m + 1 < M; ++m) {
      const double x = (static_cast<double>(m) + 0.5) * model.h;
      e = std::max(e, std::abs(species_residual(0, m, U, U, 1.0, model) / model.h + dJ(x)));
    }
    errors.push_back(e);
  }
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) EXPECT_GE(std::log2(errors[k] / errors[k + 1]), 1.8);
}

TEST(AssembleResidual, ExactSteadyStateGivesZero) {
  // Neutral mixture at bath values with equal boundary potentials.
  const auto sc = tube({{"a", 1.0, 1.0, {}}, {"b", 0.5, -1.0, {}}}, {0.15, 0.15}, 30, 0.2, 0.2);
  const auto model = DiscreteModel::from(sc);
  const UnknownVector U = initial_state(model).first;
  double norm = 0.0;
  for (double v : assemble_residual(U, U, 1e-3, model)) norm = std::max(norm, std::abs(v));
  EXPECT_LE(norm, 1e-13);
}

TEST(AssembleResidual, PoissonRowsIndependentOfDtAndStorageScalesWithInverseDt) {
  const auto sc = build_scenario(Preset::Calcium, [] {
    ScenarioOverrides o;
    o.n_cells = 12;
    return o;
  }());
  const auto model = DiscreteModel::from(sc);
  checks::Rng rng(10);
  const UnknownVector U = checks::random_interior_state(rng, model);
  const UnknownVector P = checks::random_interior_state(rng, model);
  const auto F1 = assemble_residual(U, P, 1e-3, model);
  const auto F2 = assemble_residual(U, P, 2e-3, model);
  const auto F0 = assemble_residual(U, U, 1e-3, model);  // flux part only
  for (std::size_t m = 0; m < model.cells; ++m) {
    EXPECT_EQ(F1[U.phi_index(m)], F2[U.phi_index(m)]);
    for (std::size_t i = 0; i < model.species; ++i) {
      const std::size_t k = U.index(m, i);
      const double t1 = F1[k] - F0[k], t2 = F2[k] - F0[k];
      EXPECT_NEAR(t2, 0.5 * t1, 1e-12 * std::abs(t1));
    }
  }
}

TEST(AssembleResidual, RejectsNonpositiveDtAndMismatchedShapes) {
  const auto sc = tube({{"a", 1.0, 1.0, {}}}, {0.1}, 8);
  const auto model = DiscreteModel::from(sc);
  const UnknownVector U = constant_state(model, {0.1}, 0.0);
  EXPECT_THROW(assemble_residual(U, U, 0.0, model), DomainError);
  EXPECT_THROW(assemble_residual(UnknownVector(7, 1), U, 1e-3, model), DimensionError);
}

TEST(AssembleJacobian, MatchesFiniteDifferences) {
  const CheckResult r = check_jacobian(20, 12);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(AssembleJacobian, PoissonBlockIsStateIndependent) {
  const auto sc = build_scenario(Preset::Degenerate, [] {
    ScenarioOverrides o;
    o.n_cells = 10;
    return o;
  }());
  const auto model = DiscreteModel::from(sc);
  checks::Rng rng(13);
  const UnknownVector A = checks::random_interior_state(rng, model);
  const UnknownVector B = checks::random_interior_state(rng, model);
  const auto JA = assemble_jacobian(A, A, 1e-3, model);
  const auto JB = assemble_jacobian(B, A, 2e-3, model);
  for (std::size_t m = 0; m < model.cells; ++m)
    for (std::size_t c = 0; c < model.cells; ++c) {
      if (!JA.matrix.in_band(A.phi_index(m), A.phi_index(c))) continue;
      EXPECT_EQ(JA.matrix(A.phi_index(m), A.phi_index(c)), JB.matrix(A.phi_index(m), A.phi_index(c)));
    }
}

TEST(DirichletReference, ConstantBathsGiveConstantReference) {
  const auto sc = build_scenario(Preset::Calcium);
  const auto model = DiscreteModel::from(sc);
  const ReferenceState ref = dirichlet_reference(model);
  ASSERT_EQ(ref.u.size(), model.cells);
  for (const auto& p : ref.u) {
    EXPECT_EQ(p.immobile_fraction(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], sc.boundary.u_left[i], 1e-16);
  }
}

TEST(CellPoints, RejectsClearlyNegativeValues) {
  const auto sc = tube({{"a", 1.0, 1.0, {}}}, {0.1}, 4);
  const auto model = DiscreteModel::from(sc);
  UnknownVector U = constant_state(model, {0.1}, 0.0);
  U.u(2, 0) = -1e-12;
  EXPECT_NO_THROW(cell_points(U, model));
  U.u(2, 0) = -1e-6;
  EXPECT_THROW(cell_points(U, model), InfeasibleStateError);
}
