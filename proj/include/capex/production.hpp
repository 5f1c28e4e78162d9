#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include "capex/errors.hpp"
#include "capex/model.hpp"

namespace capex {

/// Stand-in for R~_C(0) = +inf under the Inada condition. Only ever compared, never used in arithmetic.
inline constexpr double kInfiniteMarginal = std::numeric_limits<double>::max();

struct InputChoice {
  double L = 0.0;
  double K = 0.0;
};

class UnsupportedVariant : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline double cobb_douglas_value(const CobbDouglas& cd, double C, double L, double K) {
  if (C <= 0.0 || L <= 0.0 || K <= 0.0) return 0.0;
  return std::exp(cd.alpha * std::log(C) + cd.beta * std::log(L) + cd.gamma * std::log(K) -
                  std::log(cd.alpha * cd.beta * cd.gamma));
}

/// Unconstrained stationary point of R(C,.,.) - wL - rK for Cobb-Douglas, in logs.
inline std::pair<double, double> cobb_douglas_log_stationary(const CobbDouglas& cd, double C, double w, double r) {
  const double a = cd.alpha, b = cd.beta, g = cd.gamma;
  const double log_c = -std::log(a * b * g);
  // K = (g w)/(b r) L and c b C^a L^(b+g-1) ((g w)/(b r))^g = w.
  const double log_ratio = std::log(g * w / (b * r));
  const double log_L = (log_c + std::log(b) + a * std::log(C) + g * log_ratio - std::log(w)) / (1.0 - b - g);
  return {log_L, log_L + log_ratio};
}

/// Largest capacity at which the unconstrained Cobb-Douglas optimum stays in the box.
inline double cobb_douglas_binding_capacity(const CobbDouglas& cd, double w, double r) {
  const auto [log_L1, log_K1] = cobb_douglas_log_stationary(cd, 1.0, w, r);
  // log L*(C) = log L*(1) + alpha/(1-beta-gamma) log C
  const double slope = cd.alpha / (1.0 - cd.beta - cd.gamma);
  const double log_cap = std::min((std::log(cd.kappa_L) - log_L1) / slope, (std::log(cd.kappa_K) - log_K1) / slope);
  return std::exp(std::min(log_cap, 700.0));
}

/// Maximizer of a concave 1-D function on [0, hi] from its derivative, by bisection on the sign.
inline double argmax_from_derivative(const std::function<double(double)>& deriv, double hi) {
  if (deriv(0.0) <= 0.0) return 0.0;
  if (deriv(hi) >= 0.0) return hi;
  double lo = 0.0;
  for (int k = 0; k < 200 && hi - lo > 1e-14 * (1.0 + hi); ++k) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct AscentResult {
  InputChoice x;
  int iterations = 0;
  bool converged = false;
};

/// Projected coordinate ascent: alternate exact maximization in L and in K
/// until neither coordinate moves.
inline AscentResult coordinate_ascent(InputChoice start, const std::function<double(double)>& argmax_L,
                                      const std::function<double(double)>& argmax_K, double tol = 1e-14,
                                      int max_iter = 2000) {
  AscentResult res{start};
  for (; res.iterations < max_iter; ++res.iterations) {
    const double L = argmax_L(res.x.K);
    const double K = argmax_K(L);
    const double move = std::abs(L - res.x.L) / (1.0 + std::abs(L)) + std::abs(K - res.x.K) / (1.0 + std::abs(K));
    res.x = {L, K};
    if (move <= tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline std::array<double, 3> tabulated_gradient(const Tabulated& tab, double C, double L, double K) {
  if (tab.gradient) return tab.gradient(C, L, K);
  auto d = [&](double x, auto eval) {
    const double h = 1e-6 * (1.0 + std::abs(x));
    const double lo = std::max(0.0, x - h);
    return (eval(x + h) - eval(lo)) / (x + h - lo);
  };
  return {d(C, [&](double v) { return tab.R(v, L, K); }), d(L, [&](double v) { return tab.R(C, v, K); }),
          d(K, [&](double v) { return tab.R(C, L, v); })};
}

}  // namespace detail

/// Unique box-constrained maximizer of R(C, L, K) - w L - r K.
inline InputChoice optimal_inputs(const ProductionSpec& prod, double C, double w, double r) {
  detail::require(C >= 0.0, "capacity must be nonnegative");
  detail::require(w > 0.0 && r > 0.0, "wage and interest must be positive");

  if (const auto* cd = std::get_if<CobbDouglas>(&prod)) {
    if (C == 0.0) return {0.0, 0.0};
    const double a = cd->alpha, b = cd->beta, g = cd->gamma;
    const double log_c = -std::log(a * b * g) + a * std::log(C);
    // argmax over L of c C^a K^g L^b - w L: L = (c b C^a K^g / w)^(1/(1-b)).
    auto argmax_L = [&](double K) {
      if (K <= 0.0) return 0.0;
      return std::min(cd->kappa_L, std::exp((log_c + std::log(b) + g * std::log(K) - std::log(w)) / (1.0 - b)));
    };
    auto argmax_K = [&](double L) {
      if (L <= 0.0) return 0.0;
      return std::min(cd->kappa_K, std::exp((log_c + std::log(g) + b * std::log(L) - std::log(r)) / (1.0 - g)));
    };
    const auto [log_L, log_K] = detail::cobb_douglas_log_stationary(*cd, C, w, r);
    InputChoice start{std::min(cd->kappa_L, std::exp(log_L)), std::min(cd->kappa_K, std::exp(log_K))};
    if (start.L < cd->kappa_L && start.K < cd->kappa_K) return start;
    return detail::coordinate_ascent(start, argmax_L, argmax_K).x;
  }

  if (const auto* tab = std::get_if<Tabulated>(&prod)) {
    auto argmax_L = [&](double K) {
      return detail::argmax_from_derivative(
          [&](double L) { return detail::tabulated_gradient(*tab, C, L, K)[1] - w; }, tab->kappa_L);
    };
    auto argmax_K = [&](double L) {
      return detail::argmax_from_derivative(
          [&](double K) { return detail::tabulated_gradient(*tab, C, L, K)[2] - r; }, tab->kappa_K);
    };
    InputChoice start{0.5 * tab->kappa_L, 0.5 * tab->kappa_K};
    return detail::coordinate_ascent(start, argmax_L, argmax_K, 1e-13).x;
  }

  throw UnsupportedVariant("synthetic marginal production has no input choice");
}

/// Maximal production profit rate over the input box.
inline double reduced_value(const ProductionSpec& prod, double C, double w, double r) {
  detail::require(C >= 0.0, "capacity must be nonnegative");

  if (const auto* syn = std::get_if<SyntheticMarginal>(&prod)) {
    if (syn->antiderivative) return C == 0.0 ? syn->antiderivative(0.0) : syn->antiderivative(C);
    // integral of rc from 1 to C; any antiderivative is consistent for marginal use
    const auto& rc = syn->rc;
    const double lo = std::min(1.0, C), hi = std::max(1.0, C);
    const int n = 2000;
    const double hl = std::log(hi / lo) / n;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double u = lo * std::exp(hl * k);
      const double wgt = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      sum += wgt * rc(u) * u;
    }
    const double integral = sum * hl / 3.0;
    return C >= 1.0 ? integral : -integral;
  }

  const InputChoice x = optimal_inputs(prod, C, w, r);
  if (const auto* cd = std::get_if<CobbDouglas>(&prod)) {
    return detail::cobb_douglas_value(*cd, C, x.L, x.K) - w * x.L - r * x.K;
  }
  const auto& tab = std::get<Tabulated>(prod);
  return tab.R(C, x.L, x.K) - w * x.L - r * x.K;
}

/// Marginal value of capacity: closed form for interior Cobb-Douglas optima,
/// otherwise R_C at the optimal inputs.
inline double reduced_marginal(const ProductionSpec& prod, double C, double w, double r) {
  detail::require(C >= 0.0, "capacity must be nonnegative");

  if (const auto* syn = std::get_if<SyntheticMarginal>(&prod)) {
    return C == 0.0 ? kInfiniteMarginal : syn->rc(C);
  }
  if (const auto* cd = std::get_if<CobbDouglas>(&prod)) {
    if (C == 0.0) return kInfiniteMarginal;
    const double a = cd->alpha, b = cd->beta, g = cd->gamma;
    if (C <= detail::cobb_douglas_binding_capacity(*cd, w, r)) {
      const double log_inner = -std::log(b * g) + b * std::log(b / (a * w)) + g * std::log(g / (a * r)) +
                               (a + b + g - 1.0) * std::log(C);
      return std::exp(log_inner / (1.0 - b - g));
    }
    const InputChoice x = optimal_inputs(prod, C, w, r);
    return a * detail::cobb_douglas_value(*cd, C, x.L, x.K) / C;
  }
  const auto& tab = std::get<Tabulated>(prod);
  const InputChoice x = optimal_inputs(prod, C, w, r);
  return detail::tabulated_gradient(tab, C, x.L, x.K)[0];
}

/// Per-node evaluator of R~ and R~_C at the grid's wage and interest samples.
/// Power-law technologies evaluate from log capacity with one exp.
class ReducedProfile {
 public:
  ReducedProfile(const ProductionSpec& prod, const CoefficientSet& coeffs) : prod_(prod) {
    const std::size_t n = coeffs.grid().size();
    w_.resize(n);
    r_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      w_[j] = coeffs.w(j);
      r_[j] = coeffs.r(j);
    }
    if (const auto* cd = std::get_if<CobbDouglas>(&prod)) {
      const double a = cd->alpha, b = cd->beta, g = cd->gamma;
      power_ = true;
      exponent_ = (a + b + g - 1.0) / (1.0 - b - g);
      value_factor_ = (1.0 - b - g) / a;
      log_coef_.resize(n);
      log_limit_.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        log_coef_[j] = (-std::log(b * g) + b * std::log(b / (a * w_[j])) + g * std::log(g / (a * r_[j]))) /
                       (1.0 - b - g);
        log_limit_[j] = std::log(detail::cobb_douglas_binding_capacity(*cd, w_[j], r_[j]));
      }
    } else if (const auto* syn = std::get_if<SyntheticMarginal>(&prod); syn && syn->is_power_law()) {
      power_ = true;
      exponent_ = -syn->power_exponent;
      log_coef_.assign(n, std::log(syn->power_scale));
      log_limit_.assign(n, std::numeric_limits<double>::infinity());
    }
  }

  const ProductionSpec& production() const noexcept { return prod_; }
  bool power_law() const noexcept { return power_; }

  /// R~_C = exp(log_coefficient + exponent * log C) while log C <= log_limit.
  double exponent() const noexcept { return exponent_; }
  double log_coefficient(std::size_t node) const { return log_coef_[node]; }
  double log_limit(std::size_t node) const { return log_limit_[node]; }

  double marginal(std::size_t node, double capacity) const {
    if (capacity <= 0.0) return kInfiniteMarginal;
    return marginal_log(node, std::log(capacity));
  }

  double marginal_log(std::size_t node, double log_capacity) const {
    if (power_ && log_capacity <= log_limit_[node]) return std::exp(log_coef_[node] + exponent_ * log_capacity);
    return reduced_marginal(prod_, std::exp(log_capacity), w_[node], r_[node]);
  }

  double value(std::size_t node, double capacity) const {
    if (std::holds_alternative<CobbDouglas>(prod_) && capacity > 0.0) {
      const double lc = std::log(capacity);
      if (lc <= log_limit_[node]) return value_factor_ * std::exp(log_coef_[node] + (1.0 + exponent_) * lc);
    }
    return reduced_value(prod_, capacity, w_[node], r_[node]);
  }

 private:
  ProductionSpec prod_;
  std::vector<double> w_;
  std::vector<double> r_;
  bool power_ = false;
  double exponent_ = 0.0;
  double value_factor_ = 0.0;
  std::vector<double> log_coef_;
  std::vector<double> log_limit_;
};

}  // namespace capex
