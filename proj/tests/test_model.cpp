#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "capex/model.hpp"
#include "capex/validate.hpp"

using namespace capex;

TEST(TimeGrid, RejectsBadNodes) {
  EXPECT_THROW(TimeGrid({0.0}), std::invalid_argument);
  EXPECT_THROW(TimeGrid({0.1, 1.0}), std::invalid_argument);
  EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5, 1.0}), std::invalid_argument);
  EXPECT_THROW(TimeGrid::uniform(1.0, 0), std::invalid_argument);
}

TEST(TimeGrid, UniformSteps) {
  const auto g = TimeGrid::uniform(2.0, 8);
  EXPECT_EQ(g.size(), 9u);
  EXPECT_EQ(g.steps(), 8u);
  EXPECT_DOUBLE_EQ(g.horizon(), 2.0);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[8], 2.0);
  for (std::size_t i = 0; i < g.steps(); ++i) EXPECT_NEAR(g.step(i), 0.25, 1e-15);
  EXPECT_EQ(g.cell(0.0), 0u);
  EXPECT_EQ(g.cell(0.3), 1u);
  EXPECT_EQ(g.cell(2.0), 7u);
}

TEST(IntegrateRate, Constant) {
  const auto g = TimeGrid::uniform(1.0, 10);
  std::vector<double> rho(g.size(), 0.7);
  EXPECT_NEAR(integrate_rate(g, rho, 0.13, 0.82), 0.7 * (0.82 - 0.13), 1e-15);
}

TEST(IntegrateRate, EmptyInterval) {
  const auto g = TimeGrid::uniform(1.0, 10);
  std::vector<double> rho(g.size(), 3.0);
  EXPECT_EQ(integrate_rate(g, rho, 0.4, 0.4), 0.0);
}

TEST(IntegrateRate, LinearIsExact) {
  const auto g = TimeGrid::uniform(1.0, 100);
  std::vector<double> t(g.nodes().begin(), g.nodes().end());
  EXPECT_NEAR(integrate_rate(g, t, 0.0, 1.0), 0.5, 1e-15);
}

TEST(IntegrateRate, RejectsReversedBounds) {
  const auto g = TimeGrid::uniform(1.0, 4);
  std::vector<double> rho(g.size(), 1.0);
  EXPECT_THROW(integrate_rate(g, rho, 0.6, 0.2), std::invalid_argument);
}

TEST(IntegrateRate, AdditiveAndNonnegative) {
  const auto g = TimeGrid::uniform(3.0, 37);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rate(g.size());
  for (auto& x : rate) x = u(rng);
  for (int trial = 0; trial < 200; ++trial) {
    double p[3] = {3.0 * u(rng), 3.0 * u(rng), 3.0 * u(rng)};
    std::sort(p, p + 3);
    const double ab = integrate_rate(g, rate, p[0], p[1]);
    const double bc = integrate_rate(g, rate, p[1], p[2]);
    const double ac = integrate_rate(g, rate, p[0], p[2]);
    EXPECT_NEAR(ab + bc, ac, 1e-14);
    EXPECT_GE(ab, 0.0);
  }
}

TEST(CumulativeRate, MatchesDirectIntegral) {
  const auto g = TimeGrid::uniform(1.0, 20);
  std::vector<double> rate(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) rate[i] = 1.0 + std::sin(3.0 * g[i]);
  const CumulativeRate cum(g, rate);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i; j < g.size(); ++j) EXPECT_NEAR(cum.between(i, j), integrate_rate(g, rate, g[i], g[j]), 1e-14);
  }
}

TEST(CoefficientSet, CentralDifferenceDerivative) {
  const auto g = TimeGrid::uniform(1.0, 200);
  CoefficientFunctions f{[](double) { return 0.1; }, [](double) { return 0.2; },
                         [](double t) { return std::exp(-0.3 * t); }, [](double) { return 0.05; },
                         [](double) { return 1.0; }, [](double) { return 1.0; }, {}};
  const auto c = CoefficientSet::from_functions(g, f);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool edge = i == 0 || i + 1 == g.size();
    EXPECT_NEAR(c.f_C_prime(i), -0.3 * std::exp(-0.3 * g[i]), edge ? 1e-3 : 1e-5);
  }
  EXPECT_NEAR(c.bar_mu(3), 0.15, 1e-15);
  EXPECT_FALSE(c.degenerate());
}

TEST(CoefficientSet, RejectsWrongSampleCount) {
  const auto g = TimeGrid::uniform(1.0, 4);
  CoefficientSamples s{std::vector<double>(5, 0.1), std::vector<double>(4, 0.1), std::vector<double>(5, 1.0), {},
                       std::vector<double>(5, 0.1), std::vector<double>(5, 1.0), std::vector<double>(5, 1.0)};
  EXPECT_THROW(CoefficientSet(g, s), std::invalid_argument);
}

TEST(Validate, DiscountPassesEfficiencyFails) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 10), 0.1, 0.2, 1.0, 0.05);
  const auto report = validate(c, CobbDouglas{}, SaturatingExponential{1.0, 0.5});
  ASSERT_NE(report.find("discount"), nullptr);
  EXPECT_TRUE(report.find("discount")->passed);
  EXPECT_TRUE(report.passed());
  EXPECT_FALSE(report.efficiency.passed);
  ASSERT_TRUE(report.efficiency.node.has_value());
  EXPECT_EQ(*report.efficiency.node, 0u);
}

TEST(Validate, ScrapEdgeCondition) {
  const auto g = TimeGrid::uniform(1.0, 10);
  const auto ok = CoefficientSet::constant(g, 0.1, 0.2, 0.4, 0.05);
  EXPECT_TRUE(validate(ok, CobbDouglas{}, SaturatingExponential{1.0, 2.0}).find("G")->passed);
  const auto bad = CoefficientSet::constant(g, 0.1, 0.2, 0.6, 0.05);
  const auto report = validate(bad, CobbDouglas{}, SaturatingExponential{1.0, 2.0});
  EXPECT_FALSE(report.find("G")->passed);
  EXPECT_EQ(report.first_failure()->assumption, "G");
}

TEST(Validate, CobbDouglasExponentSum) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 10), 0.1, 0.2, 1.0, 0.05);
  const auto report = validate(c, CobbDouglas{0.3, 0.4, 0.4}, SaturatingExponential{1.0, 0.5});
  ASSERT_NE(report.first_failure(), nullptr);
  EXPECT_EQ(report.first_failure()->assumption, "R");
  EXPECT_NE(report.first_failure()->detail.find(">= 1"), std::string::npos);
}

TEST(Validate, ZeroScrapNeedsOverride) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 10), 0.0, 0.0, 1.0, 1.0);
  const auto report = validate(c, SyntheticMarginal::power_law(1.0, 1.0), ZeroScrap{});
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.first_failure()->assumption, ValidationReport::kScrapInada);
  EXPECT_TRUE(report.passed(true));
}

TEST(Validate, FirstViolatingNode) {
  const auto g = TimeGrid::uniform(1.0, 4);
  CoefficientSamples s{{0.1, 0.1, 0.1, 0.1, 0.1}, {0.2, 0.2, 0.2, 0.2, 0.2}, {1, 1, 1, 1, 1}, {},
                       {0.05, 0.05, 0.05, 0.05, 0.05}, {1, 1, 1, 1, 1}, {1, 1, -1, 1, 1}};
  const auto report = validate(CoefficientSet(g, s), CobbDouglas{}, SaturatingExponential{});
  const auto* lk = report.find("LK");
  ASSERT_NE(lk, nullptr);
  EXPECT_FALSE(lk->passed);
  EXPECT_EQ(lk->node, 2u);
}

TEST(Validate, RejectsNonFinite) {
  const auto g = TimeGrid::uniform(1.0, 2);
  CoefficientSamples s{{0.1, NAN, 0.1}, {0.2, 0.2, 0.2}, {1, 1, 1}, {}, {0.05, 0.05, 0.05}, {1, 1, 1}, {1, 1, 1}};
  EXPECT_THROW(validate(CoefficientSet(g, s), CobbDouglas{}, SaturatingExponential{}), AssumptionError);
}

TEST(Validate, EfficiencyHoldsWithDecayingConversion) {
  const auto g = TimeGrid::uniform(1.0, 50);
  CoefficientFunctions f{[](double) { return 0.5; }, [](double) { return 0.1; },
                         [](double t) { return std::exp(-0.6 * t); }, [](double) { return 0.05; },
                         [](double) { return 1.0; }, [](double) { return 1.0; },
                         [](double t) { return -0.6 * std::exp(-0.6 * t); }};
  const auto c = CoefficientSet::from_functions(g, f);
  EXPECT_TRUE(validate(c, CobbDouglas{}, SaturatingExponential{1.0, 0.5}).efficiency.passed);
  EXPECT_FALSE(validate(c, Tabulated{}, SaturatingExponential{1.0, 0.5}).efficiency.passed);
}

TEST(Validate, Idempotent) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 10), 0.1, 0.2, 1.0, 0.05);
  const auto a = validate(c, CobbDouglas{}, SaturatingExponential{1.0, 0.5});
  const auto b = validate(c, CobbDouglas{}, SaturatingExponential{1.0, 0.5});
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t k = 0; k < a.checks.size(); ++k) {
    EXPECT_EQ(a.checks[k].assumption, b.checks[k].assumption);
    EXPECT_EQ(a.checks[k].passed, b.checks[k].passed);
  }
  EXPECT_EQ(a.efficiency.passed, b.efficiency.passed);
}

TEST(Scrap, SaturatingExponential) {
  const ScrapSpec g = SaturatingExponential{2.0, 0.5};
  EXPECT_NEAR(g.value(3.0), 2.0 * (1.0 - std::exp(-1.5)), 1e-15);
  EXPECT_NEAR(g.marginal(3.0), std::exp(-1.5), 1e-15);
  EXPECT_TRUE(g.strictly_decreasing_marginal());
  const ScrapSpec zero;
  EXPECT_TRUE(zero.is_zero());
  EXPECT_EQ(zero.marginal(1.0), 0.0);
}
