#include <gtest/gtest.h>

#include <boost/math/tools/roots.hpp>
#include <cmath>

#include "capex/boundary.hpp"

using namespace capex;

namespace {

Model closed_form(std::size_t N) {
  SyntheticMarginal rc;
  rc.rc = [](double c) { return 1.0 / c; };
  return {CoefficientSet::constant(TimeGrid::uniform(1.0, N), 0.0, 0.0, 1.0, 1.0), rc, ZeroScrap{}};
}

BoundaryOptions zero_scrap(BoundaryOptions o) {
  o.allow_zero_scrap = true;
  return o;
}

double max_error(const BoundaryCurve& c) {
  double e = 0.0;
  for (const auto& n : c.nodes) e = std::max(e, std::abs(n.yhat - (1.0 - std::exp(-(1.0 - n.t)))));
  return e;
}

Model cobb_douglas_instance(std::size_t N) {
  return {CoefficientSet::constant(TimeGrid::uniform(1.0, N), 0.1, 0.2, 1.0, 0.05), CobbDouglas{},
          SaturatingExponential{1.0, 0.5}};
}

}  // namespace

TEST(Boundary, ClosedFormDeterministic) {
  const auto curve = deterministic_boundary(closed_form(400), zero_scrap(BoundaryOptions::deterministic()));
  ASSERT_EQ(curve.size(), 400u);
  EXPECT_LT(max_error(curve), 1e-8);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LT(curve[i], curve[i - 1]);
}

TEST(Boundary, ZeroScrapNeedsOverride) {
  EXPECT_THROW(deterministic_boundary(closed_form(10)), AssumptionError);
}

TEST(Boundary, ResidualClosedForm) {
  const auto m = closed_form(20);
  const auto batch = simulate(m.coeffs, {7, 1, Measure::Q, 0, false, 1});
  // Future values below the candidate never bind, so the residual is a plain discounted integral.
  const std::vector<double> future(20, 1e-3);
  for (double b : {0.05, 0.3, 2.0}) {
    const double expect = (1.0 - std::exp(-(1.0 - 0.35))) / b - 1.0;
    EXPECT_NEAR(residual(m, 7, b, future, batch, Quadrature::ExponentialCell).mean, expect, 1e-13);
  }
}

TEST(Boundary, ResidualRejectsNonPositiveCandidate) {
  const auto m = closed_form(4);
  const auto batch = simulate(m.coeffs, {3, 1, Measure::Q, 0, false, 1});
  const std::vector<double> future(4, 1.0);
  EXPECT_THROW(residual(m, 3, 0.0, future, batch), std::invalid_argument);
  EXPECT_THROW(residual(m, 3, -1.0, future, batch), std::invalid_argument);
}

TEST(Boundary, FastResidualMatchesDirect) {
  const auto m = cobb_douglas_instance(30);
  const ReducedProfile profile(m.production, m.coeffs);
  const auto batch = simulate(m.coeffs, {10, 200, Measure::Q, 4, true, 1});
  std::vector<double> future(30);
  for (std::size_t i = 0; i < 30; ++i) future[i] = 50.0 * std::exp(-0.1 * i);
  const NodeResidual r(m, profile, 10, future, batch, Quadrature::LeftEndpoint);
  for (double b : {1.0, 20.0, 40.0, 400.0}) EXPECT_NEAR(r(b).mean, r.direct(b).mean, 1e-9 * (1.0 + std::abs(r(b).mean)));
}

TEST(Boundary, ResidualSignAtExtremes) {
  const auto m = cobb_douglas_instance(20);
  const auto batch = simulate(m.coeffs, {5, 100, Measure::Q, 1, true, 1});
  const std::vector<double> future(20, 10.0);
  EXPECT_GT(residual(m, 5, 1e-6, future, batch).mean, 0.0);
  EXPECT_LT(residual(m, 5, 1e9, future, batch).mean, 0.0);
}

TEST(Boundary, LastNodeMatchesIndependentRootFinder) {
  const auto m = cobb_douglas_instance(20);
  BoundaryOptions o;
  o.paths = 2000;
  o.audit = false;
  const auto curve = solve_boundary(m, o);
  const auto batch = simulate(m.coeffs, {19, o.paths, Measure::Q, derive_stream(o.seed, detail::kSolveStream), true, 1});
  const std::vector<double> future(20, 1.0);
  auto f = [&](double lb) { return residual(m, 19, std::exp(lb), future, batch).mean; };
  boost::uintmax_t it = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(f, std::log(1e-3), std::log(1e6),
                                                          boost::math::tools::eps_tolerance<double>(50), it);
  EXPECT_NEAR(curve.nodes[19].yhat / std::exp(0.5 * (lo + hi)), 1.0, 1e-8);
}

TEST(Boundary, FirstOrderRefinement) {
  std::vector<double> err;
  for (std::size_t N : {50, 100, 200}) {
    auto o = zero_scrap(BoundaryOptions::deterministic());
    o.quadrature = Quadrature::LeftEndpoint;
    err.push_back(max_error(deterministic_boundary(closed_form(N), o)));
  }
  EXPECT_NEAR(err[1] / err[0], 0.5, 0.05);
  EXPECT_NEAR(err[2] / err[1], 0.5, 0.05);
}

TEST(Boundary, StochasticCurveIsPositiveAndReproducible) {
  const auto m = cobb_douglas_instance(10);
  BoundaryOptions o;
  o.paths = 1000;
  const auto a = solve_boundary(m, o);
  o.threads = 3;
  const auto b = solve_boundary(m, o);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_GT(a[i], 0.0);
    EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(a.nodes[i].residual, b.nodes[i].residual);
    EXPECT_LE(std::abs(a.nodes[i].residual), 4.0 * a.nodes[i].residual_se + 1e-8);
  }
}

TEST(Boundary, BisectionReportsBracketFailure) {
  EXPECT_THROW(detail::bracket_and_bisect([](double) { return 1.0; }, 1.0, 1e-9, 1000, 0), SolverError);
  EXPECT_THROW(detail::bracket_and_bisect([](double b) { return 1.5 - b; }, 1.0, 1e-12, 3, 0), SolverError);
}
