#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "capex/errors.hpp"
#include "capex/model.hpp"
#include "capex/paths.hpp"
#include "capex/production.hpp"
#include "capex/stats.hpp"

namespace capex {

/// Non-decreasing control on one path, stored densely on nodes start..N.
///
/// nubar is the capacity-units ledger (controlled capacity = C (y + nubar));
/// nu is the cumulative investment expenditure. Both start at 0 and an action
/// taken at t_k shows up at index k + 1.
struct InvestmentPlan {
  std::size_t start = 0;
  double y = 0.0;
  std::vector<double> nubar;
  std::vector<double> nu;

  double nubar_at(std::size_t node) const { return nubar[node - start]; }
  double nu_at(std::size_t node) const { return nu[node - start]; }
  std::size_t last() const { return start + nubar.size() - 1; }

  /// Size of the jump made at the start node.
  double initial_jump() const { return nubar.size() > 1 ? nubar[1] : 0.0; }
};

namespace detail {

inline void fill_expenditure(const CoefficientSet& coeffs, PathView path, InvestmentPlan& plan) {
  plan.nu.assign(plan.nubar.size(), 0.0);
  for (std::size_t m = 0; m + 1 < plan.nubar.size(); ++m) {
    const std::size_t node = plan.start + m;
    plan.nu[m + 1] = plan.nu[m] + path.at(node) / coeffs.f_C(node) * (plan.nubar[m + 1] - plan.nubar[m]);
  }
}

inline void require_same_span(PathView path, std::size_t last) {
  if (path.last() != last) throw GridMismatch("path and grid do not end on the same node");
}

}  // namespace detail

/// Tracking policy: nubar(t_k) = [max_{s<=i<k} yhat(t_i)/C(t_i) - y]^+.
inline InvestmentPlan build_control(const CoefficientSet& coeffs, std::span<const double> curve, PathView path,
                                    double y) {
  if (!(y > 0.0)) throw std::invalid_argument("initial capacity must be positive");
  detail::require_same_span(path, coeffs.grid().steps());
  if (curve.size() != coeffs.grid().steps()) throw GridMismatch("boundary and grid sizes differ");

  const RunningSup sup = running_sup_ratio(path, curve, path.start);
  InvestmentPlan plan;
  plan.start = path.start;
  plan.y = y;
  plan.nubar.assign(path.values.size(), 0.0);
  for (std::size_t k = path.start + 1; k <= path.last(); ++k) {
    plan.nubar[k - path.start] = std::max(sup.at(k) - y, 0.0);
  }
  detail::fill_expenditure(coeffs, path, plan);
  return plan;
}

/// A plan given directly by its nubar ledger.
inline InvestmentPlan plan_from_ledger(const CoefficientSet& coeffs, PathView path, double y, std::vector<double> nubar) {
  detail::require(nubar.size() == path.values.size(), "ledger must cover the path");
  detail::require(nubar.front() == 0.0, "ledger must start at zero");
  for (std::size_t m = 1; m < nubar.size(); ++m) detail::require(nubar[m] >= nubar[m - 1], "ledger must be non-decreasing");
  InvestmentPlan plan{path.start, y, std::move(nubar), {}};
  detail::fill_expenditure(coeffs, path, plan);
  return plan;
}

inline InvestmentPlan zero_plan(const CoefficientSet& coeffs, PathView path, double y) {
  return plan_from_ledger(coeffs, path, y, std::vector<double>(path.values.size(), 0.0));
}

/// Invest at a constant expenditure rate (units per unit time).
inline InvestmentPlan constant_rate_plan(const CoefficientSet& coeffs, PathView path, double y, double rate) {
  detail::require(rate >= 0.0, "investment rate must be nonnegative");
  const TimeGrid& grid = coeffs.grid();
  std::vector<double> nubar(path.values.size(), 0.0);
  for (std::size_t m = 0; m + 1 < nubar.size(); ++m) {
    const std::size_t node = path.start + m;
    nubar[m + 1] = nubar[m] + coeffs.f_C(node) / path.at(node) * rate * grid.step(node);
  }
  return plan_from_ledger(coeffs, path, y, std::move(nubar));
}

/// Capacity held on [t_k, t_{k+1}) after the action at t_k, i.e. C(t_k)(y + nubar(t_k+));
/// the entry for T is C(T)(y + nubar(T)).
inline std::vector<double> controlled_capacity(PathView path, const InvestmentPlan& plan) {
  if (plan.start != path.start || plan.nubar.size() != path.values.size()) {
    throw GridMismatch("plan and path do not share nodes");
  }
  const std::size_t n = path.values.size();
  std::vector<double> cap(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double ledger = plan.nubar[std::min(m + 1, n - 1)];
    cap[m] = path.values[m] * (plan.y + ledger);
  }
  return cap;
}

/// Discounted profit of one plan on one path (left-endpoint cells).
inline double path_profit(const Model& model, const ReducedProfile& profile, PathView path, const InvestmentPlan& plan) {
  const auto& coeffs = model.coeffs;
  const TimeGrid& grid = model.grid();
  const std::size_t s = path.start;
  const std::size_t N = grid.steps();
  const auto cap = controlled_capacity(path, plan);
  double total = 0.0;
  for (std::size_t k = s; k < N; ++k) {
    const double disc = std::exp(-coeffs.integral_mu_F(s, k));
    total += disc * (profile.value(k, cap[k - s]) * grid.step(k) - (plan.nu_at(k + 1) - plan.nu_at(k)));
  }
  total += std::exp(-coeffs.integral_mu_F(s, N)) * model.scrap.value(cap[N - s]);
  return total;
}

/// Monte-Carlo estimate of the expected discounted profit plus scrap, net of investment.
inline Estimate profit(const Model& model, const PathBatch& batch, std::span<const InvestmentPlan> plans,
                       unsigned threads = 1) {
  if (plans.size() != batch.size()) throw GridMismatch("one plan per path expected");
  if (batch.start() + batch.length() != model.grid().size()) throw GridMismatch("batch does not span the grid");
  const ReducedProfile profile(model.production, model.coeffs);
  std::vector<double> values(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) values[k] = path_profit(model, profile, batch.path(k), plans[k]);
  });
  return batch.estimate(values);
}

/// Tracking plans for every path of a batch.
inline std::vector<InvestmentPlan> build_controls(const CoefficientSet& coeffs, std::span<const double> curve,
                                                  const PathBatch& batch, double y, unsigned threads = 1) {
  std::vector<InvestmentPlan> plans(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) plans[k] = build_control(coeffs, curve, batch.path(k), y);
  });
  return plans;
}

}  // namespace capex
