#pragma once

#include <cmath>
#include <string>

#include "capex/model.hpp"
#include "capex/production.hpp"

namespace capex {

/// Checks every standing assumption and reports the first violating node.
/// Non-finite coefficient samples are rejected outright.
inline ValidationReport validate(const CoefficientSet& coeffs, const ProductionSpec& prod, const ScrapSpec& scrap) {
  const TimeGrid& grid = coeffs.grid();
  detail::require(grid.size() >= 2, "validation needs at least two grid nodes");
  const auto& s = coeffs.samples();
  const auto& b = coeffs.bounds();

  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (double v : {s.mu_C[i], s.sigma[i], s.f_C[i], s.f_C_prime[i], s.mu_F[i], s.w[i], s.r[i]}) {
      if (!std::isfinite(v)) {
        throw AssumptionError("non-finite coefficient value at t = " + std::to_string(grid[i]));
      }
    }
  }

  ValidationReport report;
  auto& checks = report.checks;
  checks.push_back(detail::node_check(
      "C", grid,
      [&](std::size_t i) {
        return s.mu_C[i] >= 0.0 && s.sigma[i] >= 0.0 && s.f_C[i] > 0.0 && s.f_C[i] >= b.k_f && s.f_C[i] <= b.kappa_f;
      },
      "mu_C >= 0, sigma >= 0, 0 < k_f <= f_C <= kappa_f"));
  checks.push_back(detail::node_check(
      "LK", grid,
      [&](std::size_t i) {
        return s.w[i] > 0.0 && s.w[i] >= b.k_w && s.w[i] <= b.kappa_w && s.r[i] > 0.0 && s.r[i] >= b.k_r &&
               s.r[i] <= b.kappa_r;
      },
      "0 < k_w <= w <= kappa_w and 0 < k_r <= r <= kappa_r"));
  checks.push_back(detail::node_check(
      "discount", grid, [&](std::size_t i) { return s.mu_F[i] >= 0.0 && coeffs.bar_mu(i) >= b.eps_o; },
      "mu_F >= 0 and mu_C + mu_F >= eps_o"));

  checks.push_back(detail::check_production(prod));

  AssumptionCheck g{"G"};
  {
    const auto caps = detail::log_samples(1e-8, 1e8, 33);
    double prev = scrap.marginal(0.0);
    for (double C : caps) {
      const double d = scrap.marginal(C);
      if (!std::isfinite(d) || d < 0.0 || d > prev * (1.0 + 1e-12)) {
        g.passed = false;
        g.detail = "G' must be nonnegative and non-increasing";
        break;
      }
      prev = d;
    }
    if (g.passed && scrap.marginal(1e12) > 1e-8 * (1.0 + scrap.marginal(0.0))) {
      g.passed = false;
      g.detail = "G'(C) must vanish as C grows";
    }
    const double edge = scrap.marginal(0.0) * coeffs.f_C(grid.steps());
    if (g.passed && edge > 1.0) {
      g.passed = false;
      g.node = grid.steps();
      g.detail = "G'(0) f_C(T) = " + std::to_string(edge) + " > 1";
    }
  }
  checks.push_back(g);

  AssumptionCheck i1{"I1"};
  if (const auto* syn = std::get_if<SyntheticMarginal>(&prod)) {
    if (syn->rc && !detail::inada_like(syn->rc)) {
      i1.passed = false;
      i1.detail = "rc lacks the Inada limits";
    }
  } else if (std::holds_alternative<Tabulated>(prod)) {
    const auto& tab = std::get<Tabulated>(prod);
    if (tab.R) {
      auto rc = [&](double C) { return reduced_marginal(prod, C, coeffs.w(0), coeffs.r(0)); };
      if (!(rc(1e-9) >= 10.0 * rc(1.0))) {
        i1.passed = false;
        i1.detail = "R~_C does not blow up at zero capacity";
      }
    }
  }
  checks.push_back(i1);

  AssumptionCheck i2{ValidationReport::kScrapInada};
  if (!scrap.strictly_decreasing_marginal()) {
    i2.passed = false;
    i2.detail = "G' is not strictly decreasing (zero scrap needs an explicit override)";
  }
  checks.push_back(i2);

  report.efficiency = AssumptionCheck{"efficiency"};
  if (auto node = coeffs.first_efficiency_violation()) {
    report.efficiency.passed = false;
    report.efficiency.node = *node;
    report.efficiency.detail = "sigma^2 <= mu_C and bar_mu <= -f_C'/f_C fail at t = " + std::to_string(grid[*node]);
  } else if (std::holds_alternative<Tabulated>(prod) || !scrap.convex_marginal() ||
             (std::holds_alternative<SyntheticMarginal>(prod) && !std::get<SyntheticMarginal>(prod).is_power_law())) {
    report.efficiency.passed = false;
    report.efficiency.detail = "convexity of R~_C or G' in C cannot be established";
  }
  return report;
}

}  // namespace capex
