#include <gtest/gtest.h>

#include <cmath>

#include "capex/capex.hpp"

using namespace capex;

namespace {

Model closed_form(std::size_t N) {
  SyntheticMarginal rc;
  rc.rc = [](double c) { return 1.0 / c; };
  rc.antiderivative = [](double c) { return std::log(c); };
  return {CoefficientSet::constant(TimeGrid::uniform(1.0, N), 0.0, 0.0, 1.0, 1.0), rc, ZeroScrap{}};
}

BoundaryCurve closed_form_curve(const Model& m, Quadrature q) {
  auto o = BoundaryOptions::deterministic();
  o.allow_zero_scrap = true;
  o.quadrature = q;
  return deterministic_boundary(m, o);
}

double exact(double t) { return 1.0 - std::exp(-(1.0 - t)); }

}  // namespace

TEST(Trinomial, MatchesNormalMoments) {
  const double mean = -0.03, var = 0.02;
  const auto t = Trinomial::from_moments(mean, var);
  double m1 = 0.0, m2 = 0.0, m4 = 0.0, total = 0.0;
  for (int s = 0; s < 3; ++s) {
    const double x = std::log(t.mult[s]) - mean;
    total += t.prob[s];
    m1 += t.prob[s] * x;
    m2 += t.prob[s] * x * x;
    m4 += t.prob[s] * x * x * x * x;
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_NEAR(m1, 0.0, 1e-15);
  EXPECT_NEAR(m2, var, 1e-15);
  EXPECT_NEAR(m4, 3.0 * var * var, 1e-15);
  const auto d = Trinomial::from_moments(0.1, 0.0);
  EXPECT_EQ(d.prob[1], 1.0);
  EXPECT_DOUBLE_EQ(d.mult[1], std::exp(0.1));
}

TEST(StoppingRule, FamilyAndEvaluation) {
  const auto rules = stopping_rule_family(100, 4.0);
  ASSERT_EQ(rules.size(), 13u);
  EXPECT_EQ(rules[3].evaluate(0, std::vector<double>(101, 1.0)), 30u);
  const std::vector<double> pre{1.0, 3.0, 5.0, 2.0};
  EXPECT_EQ(rules[10].evaluate(0, pre), 1u);
  EXPECT_EQ(rules[11].evaluate(0, pre), 2u);
  EXPECT_EQ(rules[12].evaluate(0, pre), 3u);  // never reaches 8: horizon
  const std::vector<double> falling{9.0, 8.5, 7.0, 3.0};
  EXPECT_EQ(rules[12].evaluate(0, falling), 2u);
  EXPECT_EQ(rules[11].evaluate(0, falling), 3u);
  EXPECT_EQ(StoppingRule::fixed(50).evaluate(10, std::vector<double>(5, 1.0)), 14u);
}

TEST(Supergradient, ClosedFormAtBoundaryAndFarAbove) {
  const auto m = closed_form(200);
  const auto curve = closed_form_curve(m, Quadrature::ExponentialCell);
  const auto batch = simulate(m.coeffs, {0, 1, Measure::P, 0, false, 1});
  const auto at = supergradient_estimate(m, curve.values(), curve[0], batch, StoppingRule::fixed(0),
                                         Quadrature::ExponentialCell);
  EXPECT_NEAR(at.mean, 0.0, 1e-8);
  const auto far = supergradient_estimate(m, curve.values(), 1e9, batch, StoppingRule::fixed(0),
                                          Quadrature::ExponentialCell);
  EXPECT_NEAR(far.mean, -1.0, 1e-8);
  const auto under = simulate(m.coeffs, {0, 1, Measure::Q, 0, false, 1});
  EXPECT_THROW(supergradient_estimate(m, curve.values(), 1.0, under, StoppingRule::fixed(0)), std::invalid_argument);
}

TEST(FOC, ClosedFormSatisfiesConditions) {
  const auto m = closed_form(200);
  const auto curve = closed_form_curve(m, Quadrature::ExponentialCell);
  const std::vector<double> ys{0.5 * curve[0], 2.0 * curve[0]};
  const auto report = check_foc(m, curve, ys);
  EXPECT_EQ(report.rules.size(), 26u);
  EXPECT_EQ(report.slackness.size(), 2u);
  EXPECT_TRUE(report.passed());
  EXPECT_GT(report.slackness[0].mean_expenditure, 0.0);
  EXPECT_EQ(report.slackness[1].mean_expenditure, 0.0);
}

TEST(FOC, InflatedBoundaryViolatesConditions) {
  const auto m = closed_form(200);
  auto curve = closed_form_curve(m, Quadrature::ExponentialCell);
  for (auto& n : curve.nodes) n.yhat *= 1.2;
  const std::vector<double> ys{0.5 * curve[0]};
  EXPECT_FALSE(check_foc(m, curve, ys).passed());
}

TEST(Lattice, GeometryAndInterpolation) {
  const auto m = closed_form(10);
  const Lattice lat(m.coeffs, 0.1, 10.0, 201);
  EXPECT_NEAR(lat.y(0), 0.1, 1e-15);
  EXPECT_NEAR(lat.y(200), 10.0, 1e-12);
  EXPECT_NEAR(lat.log_step(), std::log(100.0) / 200.0, 1e-15);
  std::vector<double> logs(201);
  for (std::size_t k = 0; k < 201; ++k) logs[k] = std::log(lat.y(k));
  for (double y : {0.05, 0.3, 1.7, 9.99, 20.0}) EXPECT_NEAR(lat.interpolate(logs, y), std::log(y), 1e-12);
  EXPECT_THROW(Lattice(m.coeffs, 1.0, 0.5, 10), std::invalid_argument);
}

TEST(DP, ClosedFormStoppingBoundaryWithinOneCell) {
  const auto m = closed_form(50);
  const Lattice lat(m.coeffs, 0.005, 4.0, 400);
  const auto s = dp_stopping_value(m, lat);
  for (std::size_t i = 0; i < 50; ++i) {
    ASSERT_FALSE(std::isnan(s.boundary[i]));
    const double y = exact(m.grid()[i]);
    // one cell for the lattice, one step of time discretization
    EXPECT_LT(std::abs(std::log(s.boundary[i] / y)), lat.log_step() + 0.02 / y) << i;
  }
}

TEST(DP, ValueShapeProperties) {
  const auto m = closed_form(50);
  const Lattice lat(m.coeffs, 0.005, 4.0, 200);
  const auto v = dp_value(m, lat);
  const auto s = dp_stopping_value(m, lat);
  for (std::size_t i = 0; i <= 50; ++i) {
    for (std::size_t k = 1; k < lat.size(); ++k) EXPECT_GE(v.V[i][k], v.V[i][k - 1]);
  }
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t k = 0; k < lat.size(); ++k) EXPECT_LE(s.v[i][k], 1.0 / m.coeffs.f_C(i) + 1e-15);
  }
  EXPECT_LT(shadow_value_gap(v, s, 1, lat.size() - 1), 0.02);
}

TEST(DP, SingleStepMatchesExhaustiveSearch) {
  SyntheticMarginal rc;
  rc.rc = [](double c) { return 1.0 / c; };
  rc.antiderivative = [](double c) { return std::log(c); };
  const Model m{CoefficientSet::constant(TimeGrid::uniform(1.0, 1), 0.1, 0.3, 1.0, 0.2), rc,
                SaturatingExponential{1.0, 0.5}};
  const Lattice lat(m.coeffs, 0.01, 50.0, 120);
  const auto v = dp_value(m, lat);
  const auto& shock = lat.shock(0, Measure::P);
  const double disc = std::exp(-0.2);
  for (std::size_t a = 0; a < lat.size(); ++a) {
    double best = -1e300;
    for (std::size_t b = a; b < lat.size(); ++b) {
      const double y = lat.y(b);
      double e = 0.0;
      for (int s = 0; s < 3; ++s) e += shock.prob[s] * lat.interpolate(v.V[1], y * shock.mult[s]);
      best = std::max(best, std::log(y) + disc * e - (y - lat.y(a)));
    }
    EXPECT_NEAR(v.V[0][a], best, 1e-12);
  }
}

TEST(DP, RangeErrors) {
  const auto m = closed_form(10);
  EXPECT_THROW(dp_stopping_value(m, Lattice(m.coeffs, 0.001, 0.1, 50)), LatticeRangeError);
  EXPECT_THROW(dp_value(m, Lattice(m.coeffs, 0.001, 0.1, 50)), LatticeRangeError);
  const auto other = closed_form(11);
  EXPECT_THROW(dp_value(m, Lattice(other.coeffs, 0.01, 4.0, 50)), GridMismatch);
}

TEST(CrossValidation, GapShrinksWithLattice) {
  const auto m = closed_form(50);
  const auto curve = closed_form_curve(m, Quadrature::LeftEndpoint);
  double previous = 1.0;
  for (std::size_t M : {100, 200, 400, 800}) {
    const Lattice lat(m.coeffs, 0.005, 4.0, M);
    const auto s = dp_stopping_value(m, lat);
    const auto v = dp_value(m, lat);
    const auto cv = cross_validate(curve.values(), s.boundary, lat, v.boundary);
    EXPECT_EQ(cv.unresolved, 0u);
    EXPECT_LE(cv.sup_gap_cells, 1.0);
    EXPECT_LT(cv.sup_gap, 0.6 * previous);
    previous = cv.sup_gap;
  }
}

TEST(CrossValidation, CountsUnresolvedNodes) {
  const auto m = closed_form(4);
  const Lattice lat(m.coeffs, 0.1, 4.0, 10);
  const std::vector<double> curve{1.0, 1.0, 1.0, 1.0};
  const std::vector<double> dp{1.1, NAN, 0.8, NAN};
  const auto cv = cross_validate(curve, dp, lat);
  EXPECT_EQ(cv.unresolved, 2u);
  EXPECT_NEAR(cv.sup_gap, 0.25, 1e-15);
  EXPECT_EQ(cv.sup_node, 2u);
}
