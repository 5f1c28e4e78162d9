#include <gtest/gtest.h>

#include <cmath>

#include "capex/paths.hpp"
#include "capex/random.hpp"
#include "capex/stats.hpp"

using namespace capex;

TEST(Random, PhiloxIsDeterministicAndKeyed) {
  NormalStream a(derive_stream(1, 2)), b(derive_stream(1, 2)), c(derive_stream(1, 3));
  bool differs = false;
  for (int k = 0; k < 100; ++k) {
    const double x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Random, NormalMoments) {
  NormalStream s(derive_stream(42, 0));
  const int n = 200000;
  double m1 = 0.0, m2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = s.next();
    m1 += x;
    m2 += x * x;
  }
  m1 /= n;
  m2 /= n;
  EXPECT_NEAR(m1, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Stats, EstimateAndAntitheticPairs) {
  const std::vector<double> x{1.0, 3.0, 2.0, 6.0};
  const auto e = estimate(x);
  EXPECT_DOUBLE_EQ(e.mean, 3.0);
  EXPECT_NEAR(e.se, std::sqrt((4.0 + 0.0 + 1.0 + 9.0) / 3.0 / 4.0), 1e-15);
  const auto a = estimate(x, true);
  EXPECT_DOUBLE_EQ(a.mean, 3.0);
  EXPECT_NEAR(a.se, std::sqrt(2.0 / 1.0 / 2.0), 1e-15);
  EXPECT_EQ(estimate(std::vector<double>{5.0}).se, 0.0);
}

TEST(Paths, DeterministicPathIsExact) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 10), 0.1, 0.0, 1.0, 0.05);
  const auto b = simulate(c, {0, 1, Measure::P, 1, false, 1});
  const auto p = b.path(0);
  EXPECT_EQ(p.at(0), 1.0);
  EXPECT_NEAR(p.at(10), std::exp(-0.1), 1e-15);
  const auto mid = simulate(c, {4, 1, Measure::Q, 1, false, 1}).path(0);
  EXPECT_EQ(mid.start, 4u);
  EXPECT_EQ(mid.last(), 10u);
  EXPECT_NEAR(mid.at(10), std::exp(-0.06), 1e-15);
}

TEST(Paths, MeanUnderPAndQ) {
  const double mu = 0.2, sigma = 0.3;
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 8), mu, sigma, 1.0, 0.05);
  const std::size_t n = 100000;
  for (Measure m : {Measure::P, Measure::Q}) {
    const auto b = simulate(c, {0, n, m, 11, true, 4});
    std::vector<double> last(n);
    for (std::size_t k = 0; k < n; ++k) last[k] = b.path(k).at(8);
    const auto e = b.estimate(last);
    const double expect = m == Measure::P ? std::exp(-mu) : std::exp(sigma * sigma - mu);
    EXPECT_NEAR(e.mean, expect, 4.0 * e.se) << to_string(m);
  }
}

TEST(Paths, ReproducibleAcrossThreadCounts) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 20), 0.1, 0.25, 1.0, 0.05);
  const auto a = simulate(c, {3, 64, Measure::Q, 5, true, 1});
  const auto b = simulate(c, {3, 64, Measure::Q, 5, true, 7});
  for (std::size_t k = 0; k < 64; ++k) {
    for (std::size_t i = 3; i <= 20; ++i) EXPECT_EQ(a.path(k).at(i), b.path(k).at(i));
  }
}

TEST(Paths, AntitheticPairsMirrorNoise) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 5), 0.0, 0.3, 1.0, 0.05);
  const auto b = simulate(c, {0, 2, Measure::P, 9, true, 1});
  for (std::size_t i = 1; i <= 5; ++i) {
    EXPECT_NEAR(std::log(b.path(0).at(i)) + std::log(b.path(1).at(i)), -0.09 * (i / 5.0), 1e-12);
  }
  EXPECT_THROW(simulate(c, {0, 3, Measure::P, 9, true, 1}), std::invalid_argument);
}

TEST(Paths, CommonRandomNumbersAcrossStartNodes) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 10), 0.0, 0.2, 1.0, 0.05);
  const auto a = simulate(c, {0, 4, Measure::P, 3, false, 1});
  const auto b = simulate(c, {5, 4, Measure::P, 3, false, 1});
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(a.stream(k), b.stream(k));
}

TEST(RunningSup, SmallExample) {
  const std::vector<double> c{1.0, 1.0, 1.0, 1.0};
  const std::vector<double> curve{2.0, 1.5, 1.8};
  const auto s = running_sup_ratio(PathView{0, c}, curve, 0);
  EXPECT_EQ(s.at(1), 2.0);
  EXPECT_EQ(s.at(2), 2.0);
  EXPECT_EQ(s.at(3), 2.0);
  const auto t = running_sup_ratio(PathView{0, c}, curve, 1);
  EXPECT_EQ(t.at(2), 1.5);
  EXPECT_EQ(t.at(3), 1.8);
  EXPECT_THROW(running_sup_ratio(PathView{0, c}, curve, 3), std::invalid_argument);
}

TEST(RunningSup, MatchesBruteForce) {
  const auto c = CoefficientSet::constant(TimeGrid::uniform(1.0, 30), 0.1, 0.4, 1.0, 0.05);
  const auto b = simulate(c, {0, 20, Measure::P, 17, false, 1});
  std::vector<double> curve(30);
  for (std::size_t i = 0; i < 30; ++i) curve[i] = 1.0 + std::sin(0.7 * i);
  for (std::size_t k = 0; k < 20; ++k) {
    const auto p = b.path(k);
    const auto s = running_sup_ratio(p, curve, 2);
    for (std::size_t m = 3; m <= 30; ++m) {
      double best = 0.0;
      for (std::size_t i = 2; i < m; ++i) best = std::max(best, curve[i] / p.at(i));
      EXPECT_EQ(s.at(m), best);
    }
  }
}
