#include <gtest/gtest.h>

#include <cmath>

#include "capex/policy.hpp"

using namespace capex;

namespace {

CoefficientSet flat(std::size_t N, double sigma = 0.0) { return CoefficientSet::constant(TimeGrid::uniform(1.0, N), 0.0, sigma, 1.0, 0.0); }

}  // namespace

TEST(Policy, SmallTrackingExample) {
  const auto c = flat(3);
  const std::vector<double> path{1.0, 1.0, 1.0, 1.0};
  const std::vector<double> curve{2.0, 1.5, 1.8};
  const auto plan = build_control(c, curve, PathView{0, path}, 1.0);
  EXPECT_EQ(plan.nubar, (std::vector<double>{0.0, 1.0, 1.0, 1.0}));
  EXPECT_EQ(plan.nu, (std::vector<double>{0.0, 1.0, 1.0, 1.0}));
  EXPECT_EQ(plan.initial_jump(), 1.0);
  const auto cap = controlled_capacity(PathView{0, path}, plan);
  EXPECT_EQ(cap, (std::vector<double>{2.0, 2.0, 2.0, 2.0}));
}

TEST(Policy, NoActionAboveBoundary) {
  const auto c = flat(3);
  const std::vector<double> path{1.0, 1.0, 1.0, 1.0};
  const std::vector<double> curve{2.0, 1.5, 1.8};
  const auto plan = build_control(c, curve, PathView{0, path}, 5.0);
  EXPECT_EQ(plan.nubar, std::vector<double>(4, 0.0));
  EXPECT_THROW(build_control(c, curve, PathView{0, path}, 0.0), std::invalid_argument);
  const std::vector<double> short_curve{2.0, 1.5};
  EXPECT_THROW(build_control(c, short_curve, PathView{0, path}, 1.0), GridMismatch);
}

TEST(Policy, ZeroPlan) {
  const auto c = flat(5);
  const std::vector<double> path(6, 1.0);
  const auto plan = zero_plan(c, PathView{0, path}, 2.0);
  EXPECT_EQ(plan.nu, std::vector<double>(6, 0.0));
  EXPECT_EQ(plan.initial_jump(), 0.0);
  EXPECT_THROW(plan_from_ledger(c, PathView{0, path}, 1.0, {0, 1, 0.5, 1, 1, 1}), std::invalid_argument);
}

TEST(Policy, TrackingKeepsCapacityAtOrAboveBoundaryWithMinimalEffort) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 40), 0.2, 0.4, 1.3, 0.05);
  std::vector<double> curve(40);
  for (std::size_t i = 0; i < 40; ++i) curve[i] = 3.0 * std::exp(-0.02 * i);
  const auto batch = simulate(c, {0, 50, Measure::P, 8, false, 1});
  const auto plans = build_controls(c, curve, batch, 1.0, 4);
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const auto path = batch.path(p);
    const auto& plan = plans[p];
    const auto cap = controlled_capacity(path, plan);
    for (std::size_t k = 0; k < 40; ++k) {
      EXPECT_GE(cap[k], curve[k] * (1.0 - 1e-12));
      const double dn = plan.nubar[k + 1] - plan.nubar[k];
      EXPECT_GE(dn, 0.0);
      if (dn > 0.0) EXPECT_NEAR(cap[k] / curve[k], 1.0, 1e-12);
      EXPECT_NEAR(plan.nu[k + 1] - plan.nu[k], path.at(k) / 1.3 * dn, 1e-12 * (1.0 + plan.nu[k + 1]));
    }
  }
}

TEST(Policy, ConstantRateSpendsLinearly) {
  const auto c = flat(10, 0.3);
  const auto batch = simulate(c, {0, 1, Measure::P, 2, false, 1});
  const auto plan = constant_rate_plan(c, batch.path(0), 1.0, 0.5);
  for (std::size_t k = 0; k <= 10; ++k) EXPECT_NEAR(plan.nu_at(k), 0.05 * k, 1e-14);
}

TEST(Policy, DeterministicProfit) {
  SyntheticMarginal rc;
  rc.rc = [](double x) { return 1.0 / x; };
  rc.antiderivative = [](double x) { return std::log(x); };
  const Model m{flat(20), rc, SaturatingExponential{1.0, 0.5}};
  const auto batch = simulate(m.coeffs, {0, 1, Measure::P, 0, false, 1});
  std::vector<InvestmentPlan> plans{zero_plan(m.coeffs, batch.path(0), std::exp(1.0))};
  const auto e = profit(m, batch, plans);
  EXPECT_NEAR(e.mean, 1.0 + (1.0 - std::exp(-0.5 * std::exp(1.0))), 1e-13);
  EXPECT_EQ(e.se, 0.0);

  // Jumping from e to e^2 at t = 0 costs e and doubles log capacity.
  const std::vector<double> curve(20, std::exp(2.0));
  plans[0] = build_control(m.coeffs, curve, batch.path(0), std::exp(1.0));
  EXPECT_NEAR(profit(m, batch, plans).mean, 2.0 - (std::exp(2.0) - std::exp(1.0)) + (1.0 - std::exp(-0.5 * std::exp(2.0))),
              1e-12);
}

TEST(Policy, ProfitChecksShapes) {
  const Model m{flat(4), CobbDouglas{}, SaturatingExponential{}};
  const auto batch = simulate(m.coeffs, {0, 2, Measure::P, 0, false, 1});
  std::vector<InvestmentPlan> one{zero_plan(m.coeffs, batch.path(0), 1.0)};
  EXPECT_THROW(profit(m, batch, one), GridMismatch);
}
