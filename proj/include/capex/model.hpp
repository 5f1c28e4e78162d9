#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "capex/errors.hpp"
#include "capex/grid.hpp"

namespace capex {

using TimeFunction = std::function<double(double)>;

/// Linear interpolation of node samples at an arbitrary time in [0, T].
inline double interpolate(const TimeGrid& grid, std::span<const double> samples, double t) {
  detail::require(samples.size() == grid.size(), "sample count does not match the grid");
  const std::size_t i = grid.cell(t);
  const double u = (t - grid[i]) / grid.step(i);
  return samples[i] + u * (samples[i + 1] - samples[i]);
}

/// Composite trapezoid of the piecewise-linear interpolant of `rate` over [a, b].
inline double integrate_rate(const TimeGrid& grid, std::span<const double> rate, double a, double b) {
  detail::require(rate.size() == grid.size(), "sample count does not match the grid");
  if (a > b) throw std::invalid_argument("integrate_rate: lower limit exceeds upper limit");
  detail::require(a >= 0.0 && b <= grid.horizon(), "integrate_rate: limits outside [0, T]");
  if (a == b) return 0.0;

  const auto nodes = grid.nodes();
  auto first = std::upper_bound(nodes.begin(), nodes.end(), a);
  double left_t = a;
  double left_g = interpolate(grid, rate, a);
  double sum = 0.0;
  for (auto it = first; it != nodes.end() && *it < b; ++it) {
    const auto k = static_cast<std::size_t>(it - nodes.begin());
    sum += 0.5 * (left_g + rate[k]) * (*it - left_t);
    left_t = *it;
    left_g = rate[k];
  }
  sum += 0.5 * (left_g + interpolate(grid, rate, b)) * (b - left_t);
  return sum;
}

/// Node-cumulative trapezoid integral, so node-to-node integrals are O(1).
class CumulativeRate {
 public:
  CumulativeRate() = default;
  CumulativeRate(const TimeGrid& grid, std::span<const double> rate) : cumulative_(grid.size(), 0.0) {
    detail::require(rate.size() == grid.size(), "sample count does not match the grid");
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      cumulative_[k + 1] = cumulative_[k] + 0.5 * (rate[k] + rate[k + 1]) * grid.step(k);
    }
  }

  double between(std::size_t i, std::size_t j) const { return cumulative_[j] - cumulative_[i]; }

 private:
  std::vector<double> cumulative_;
};

/// Node samples of every deterministic coefficient.
struct CoefficientSamples {
  std::vector<double> mu_C;
  std::vector<double> sigma;
  std::vector<double> f_C;
  std::vector<double> f_C_prime;  // empty: central differences of f_C
  std::vector<double> mu_F;
  std::vector<double> w;
  std::vector<double> r;
};

struct CoefficientFunctions {
  TimeFunction mu_C;
  TimeFunction sigma;
  TimeFunction f_C;
  TimeFunction mu_F;
  TimeFunction w;
  TimeFunction r;
  TimeFunction f_C_prime;  // optional
};

/// Bounds from the standing assumptions. Unset upper bounds are +inf and
/// unset lower bounds only require strict positivity.
struct AssumptionBounds {
  double k_f = 0.0;
  double kappa_f = std::numeric_limits<double>::infinity();
  double k_w = 0.0;
  double kappa_w = std::numeric_limits<double>::infinity();
  double k_r = 0.0;
  double kappa_r = std::numeric_limits<double>::infinity();
  double eps_o = 1e-6;
};

class CoefficientSet {
 public:
  CoefficientSet(TimeGrid grid, CoefficientSamples samples, AssumptionBounds bounds = {})
      : grid_(std::move(grid)), s_(std::move(samples)), bounds_(bounds) {
    const std::size_t n = grid_.size();
    for (const auto* v : {&s_.mu_C, &s_.sigma, &s_.f_C, &s_.mu_F, &s_.w, &s_.r}) {
      detail::require(v->size() == n, "coefficient samples must have one value per grid node");
    }
    if (s_.f_C_prime.empty()) {
      s_.f_C_prime = central_difference(grid_, s_.f_C);
    }
    detail::require(s_.f_C_prime.size() == n, "f_C' samples must have one value per grid node");

    bar_mu_.resize(n);
    sigma2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      bar_mu_[i] = s_.mu_C[i] + s_.mu_F[i];
      sigma2_[i] = s_.sigma[i] * s_.sigma[i];
    }
    int_mu_C_ = CumulativeRate(grid_, s_.mu_C);
    int_mu_F_ = CumulativeRate(grid_, s_.mu_F);
    int_bar_mu_ = CumulativeRate(grid_, bar_mu_);
    int_sigma2_ = CumulativeRate(grid_, sigma2_);
  }

  static CoefficientSet from_functions(TimeGrid grid, const CoefficientFunctions& f,
                                       AssumptionBounds bounds = {}) {
    auto sample = [&](const TimeFunction& fn) {
      std::vector<double> out;
      if (!fn) return out;
      out.reserve(grid.size());
      for (double t : grid.nodes()) out.push_back(fn(t));
      return out;
    };
    CoefficientSamples s{sample(f.mu_C), sample(f.sigma), sample(f.f_C), sample(f.f_C_prime),
                         sample(f.mu_F), sample(f.w),     sample(f.r)};
    return CoefficientSet(std::move(grid), std::move(s), bounds);
  }

  static CoefficientSet constant(TimeGrid grid, double mu_C, double sigma, double f_C, double mu_F,
                                 double w = 1.0, double r = 1.0, AssumptionBounds bounds = {}) {
    const std::size_t n = grid.size();
    CoefficientSamples s{std::vector<double>(n, mu_C), std::vector<double>(n, sigma),
                         std::vector<double>(n, f_C),  std::vector<double>(n, 0.0),
                         std::vector<double>(n, mu_F), std::vector<double>(n, w),
                         std::vector<double>(n, r)};
    return CoefficientSet(std::move(grid), std::move(s), bounds);
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  const AssumptionBounds& bounds() const noexcept { return bounds_; }
  const CoefficientSamples& samples() const noexcept { return s_; }

  double mu_C(std::size_t i) const { return s_.mu_C[i]; }
  double sigma(std::size_t i) const { return s_.sigma[i]; }
  double f_C(std::size_t i) const { return s_.f_C[i]; }
  double f_C_prime(std::size_t i) const { return s_.f_C_prime[i]; }
  double mu_F(std::size_t i) const { return s_.mu_F[i]; }
  double w(std::size_t i) const { return s_.w[i]; }
  double r(std::size_t i) const { return s_.r[i]; }
  double bar_mu(std::size_t i) const { return bar_mu_[i]; }

  std::span<const double> bar_mu_samples() const noexcept { return bar_mu_; }
  std::span<const double> sigma2_samples() const noexcept { return sigma2_; }

  double integral_mu_C(std::size_t i, std::size_t j) const { return int_mu_C_.between(i, j); }
  double integral_mu_F(std::size_t i, std::size_t j) const { return int_mu_F_.between(i, j); }
  double integral_bar_mu(std::size_t i, std::size_t j) const { return int_bar_mu_.between(i, j); }
  double integral_sigma2(std::size_t i, std::size_t j) const { return int_sigma2_.between(i, j); }

  /// True when sigma vanishes at every node.
  bool degenerate() const {
    return std::all_of(s_.sigma.begin(), s_.sigma.end(), [](double v) { return v == 0.0; });
  }

  /// sigma^2 <= mu_C and bar_mu <= -f_C'/f_C at every node.
  std::optional<std::size_t> first_efficiency_violation() const {
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (sigma2_[i] > s_.mu_C[i]) return i;
      if (bar_mu_[i] > -s_.f_C_prime[i] / s_.f_C[i]) return i;
    }
    return std::nullopt;
  }

 private:
  static std::vector<double> central_difference(const TimeGrid& grid, const std::vector<double>& f) {
    const std::size_t n = grid.size();
    std::vector<double> d(n, 0.0);
    if (f.size() != n) return d;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i == 0 ? 0 : i - 1;
      const std::size_t hi = i + 1 == n ? i : i + 1;
      d[i] = (f[hi] - f[lo]) / (grid[hi] - grid[lo]);
    }
    return d;
  }

  TimeGrid grid_;
  CoefficientSamples s_;
  AssumptionBounds bounds_;
  std::vector<double> bar_mu_;
  std::vector<double> sigma2_;
  CumulativeRate int_mu_C_;
  CumulativeRate int_mu_F_;
  CumulativeRate int_bar_mu_;
  CumulativeRate int_sigma2_;
};

// ---------------------------------------------------------------------------
// Production technology

/// R(C, L, K) = C^alpha L^beta K^gamma / (alpha beta gamma) on the box [0, kappa_L] x [0, kappa_K].
struct CobbDouglas {
  double alpha = 0.25;
  double beta = 0.25;
  double gamma = 0.25;
  double kappa_L = 1e6;
  double kappa_K = 1e6;
};

/// User-supplied concave R(C, L, K). The gradient (dC, dL, dK) is optional;
/// finite differences are used without it.
struct Tabulated {
  std::function<double(double, double, double)> R;
  std::function<std::array<double, 3>(double, double, double)> gradient;
  double kappa_L = 1.0;
  double kappa_K = 1.0;
};

/// A marginal profile rc(C) fed straight to the boundary solver.
struct SyntheticMarginal {
  std::function<double(double)> rc;
  std::function<double(double)> antiderivative;  // optional
  /// Set when rc(C) = power_scale * C^(-power_exponent); enables fast paths.
  double power_scale = 0.0;
  double power_exponent = 0.0;

  static SyntheticMarginal power_law(double scale, double exponent) {
    detail::require(scale > 0.0 && exponent > 0.0, "power-law marginal needs positive scale and exponent");
    SyntheticMarginal m;
    m.power_scale = scale;
    m.power_exponent = exponent;
    m.rc = [scale, exponent](double c) { return scale * std::pow(c, -exponent); };
    m.antiderivative = [scale, exponent](double c) {
      if (exponent == 1.0) return scale * std::log(c);
      return scale * std::pow(c, 1.0 - exponent) / (1.0 - exponent);
    };
    return m;
  }

  bool is_power_law() const noexcept { return power_scale > 0.0; }
};

using ProductionSpec = std::variant<CobbDouglas, Tabulated, SyntheticMarginal>;

// ---------------------------------------------------------------------------
// Scrap value

struct ZeroScrap {};

/// G(C) = a (1 - exp(-b C)).
struct SaturatingExponential {
  double a = 1.0;
  double b = 1.0;
};

struct CustomScrap {
  std::function<double(double)> G;
  std::function<double(double)> G_prime;
  bool strictly_decreasing_marginal = false;
};

class ScrapSpec {
 public:
  using Variant = std::variant<ZeroScrap, SaturatingExponential, CustomScrap>;

  ScrapSpec() = default;
  ScrapSpec(Variant v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)
  template <class S, class = std::enable_if_t<std::is_constructible_v<Variant, S> &&
                                              !std::is_same_v<std::decay_t<S>, Variant> &&
                                              !std::is_same_v<std::decay_t<S>, ScrapSpec>>>
  ScrapSpec(S s) : v_(std::move(s)) {}  // NOLINT(google-explicit-constructor)

  const Variant& variant() const noexcept { return v_; }

  double value(double c) const {
    return std::visit(
        [c](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ZeroScrap>) return 0.0;
          else if constexpr (std::is_same_v<T, SaturatingExponential>) return -s.a * std::expm1(-s.b * c);
          else return s.G(c);
        },
        v_);
  }

  double marginal(double c) const {
    return std::visit(
        [c](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ZeroScrap>) return 0.0;
          else if constexpr (std::is_same_v<T, SaturatingExponential>) return s.a * s.b * std::exp(-s.b * c);
          else return s.G_prime(c);
        },
        v_);
  }

  /// Strict decrease of G' (the scrap half of the Inada requirements).
  bool strictly_decreasing_marginal() const {
    return std::visit(
        [](const auto& s) -> bool {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ZeroScrap>) return false;
          else if constexpr (std::is_same_v<T, SaturatingExponential>) return s.a > 0.0 && s.b > 0.0;
          else return s.strictly_decreasing_marginal;
        },
        v_);
  }

  bool is_zero() const { return std::holds_alternative<ZeroScrap>(v_); }

  /// G' convex in C; one of the efficiency requirements.
  bool convex_marginal() const { return !std::holds_alternative<CustomScrap>(v_); }

 private:
  Variant v_ = ZeroScrap{};
};

/// Everything that defines one capacity-expansion problem.
struct Model {
  CoefficientSet coeffs;
  ProductionSpec production;
  ScrapSpec scrap;

  const TimeGrid& grid() const noexcept { return coeffs.grid(); }
};

// ---------------------------------------------------------------------------
// Validation

struct AssumptionCheck {
  AssumptionCheck() = default;
  explicit AssumptionCheck(std::string name) : assumption(std::move(name)) {}

  std::string assumption;
  bool passed = true;
  std::optional<std::size_t> node;  // first violating grid node, if node-based
  std::string detail;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  AssumptionCheck efficiency{"efficiency"};

  static constexpr const char* kScrapInada = "I2";

  /// All hard checks pass; the scrap Inada requirement may be waived.
  bool passed(bool allow_zero_scrap = false) const { return first_failure(allow_zero_scrap) == nullptr; }

  const AssumptionCheck* first_failure(bool allow_zero_scrap = false) const {
    for (const auto& c : checks) {
      if (c.passed) continue;
      if (allow_zero_scrap && c.assumption == kScrapInada) continue;
      return &c;
    }
    return nullptr;
  }

  const AssumptionCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.assumption == name) return &c;
    }
    return nullptr;
  }
};

namespace detail {

inline AssumptionCheck node_check(const std::string& name, const TimeGrid& grid,
                                  const std::function<bool(std::size_t)>& ok, const std::string& what) {
  AssumptionCheck c{name};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!ok(i)) {
      c.passed = false;
      c.node = i;
      c.detail = what + " fails at t = " + std::to_string(grid[i]);
      return c;
    }
  }
  return c;
}

inline std::vector<double> log_samples(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n - 1));
  }
  return out;
}

inline AssumptionCheck check_production(const ProductionSpec& prod) {
  AssumptionCheck c{"R"};
  if (const auto* cd = std::get_if<CobbDouglas>(&prod)) {
    const double sum = cd->alpha + cd->beta + cd->gamma;
    if (!(cd->alpha > 0.0 && cd->beta > 0.0 && cd->gamma > 0.0)) {
      c.passed = false;
      c.detail = "Cobb-Douglas exponents must be positive";
    } else if (!(sum < 1.0)) {
      c.passed = false;
      c.detail = "Cobb-Douglas exponents sum to " + std::to_string(sum) + " >= 1";
    } else if (!(cd->kappa_L > 0.0 && cd->kappa_K > 0.0)) {
      c.passed = false;
      c.detail = "input box bounds must be positive";
    }
    return c;
  }
  if (const auto* tab = std::get_if<Tabulated>(&prod)) {
    if (!tab->R || !(tab->kappa_L > 0.0 && tab->kappa_K > 0.0)) {
      c.passed = false;
      c.detail = "tabulated production needs R and a positive input box";
      return c;
    }
    // Spot checks of nonnegativity, monotonicity and midpoint concavity on a
    // deterministic sample of the box.
    const auto caps = log_samples(1e-3, 1e3, 9);
    const std::array<double, 4> frac{0.0, 0.25, 0.6, 1.0};
    for (double C : caps) {
      for (double fl : frac) {
        for (double fk : frac) {
          const double L = fl * tab->kappa_L;
          const double K = fk * tab->kappa_K;
          const double v = tab->R(C, L, K);
          if (!std::isfinite(v) || v < 0.0) {
            c.passed = false;
            c.detail = "R negative or non-finite on the box";
            return c;
          }
          if (tab->R(2.0 * C, L, K) < v - 1e-12 * std::abs(v)) {
            c.passed = false;
            c.detail = "R decreasing in C";
            return c;
          }
          const double C2 = 3.0 * C;
          const double L2 = (1.0 - fl) * tab->kappa_L;
          const double K2 = (1.0 - fk) * tab->kappa_K;
          const double mid = tab->R(0.5 * (C + C2), 0.5 * (L + L2), 0.5 * (K + K2));
          if (mid < 0.5 * (v + tab->R(C2, L2, K2)) - 1e-10 * (1.0 + std::abs(mid))) {
            c.passed = false;
            c.detail = "R not concave on the box";
            return c;
          }
        }
      }
    }
    return c;
  }
  const auto& syn = std::get<SyntheticMarginal>(prod);
  if (!syn.rc) {
    c.passed = false;
    c.detail = "synthetic marginal needs rc";
    return c;
  }
  const auto caps = log_samples(1e-8, 1e8, 33);
  double prev = std::numeric_limits<double>::infinity();
  for (double C : caps) {
    const double v = syn.rc(C);
    if (!std::isfinite(v) || v <= 0.0 || !(v < prev)) {
      c.passed = false;
      c.detail = "rc must be positive and strictly decreasing";
      return c;
    }
    prev = v;
  }
  return c;
}

/// Numerical proxy for rc(0+) = +inf and rc(inf) = 0: at least a decade of
/// growth towards 1e-12 and of decay towards 1e12 relative to rc(1).
inline bool inada_like(const std::function<double(double)>& rc) {
  const double mid = rc(1.0);
  return rc(1e-12) >= 10.0 * mid && rc(1e12) <= 0.1 * mid;
}

}  // namespace detail

}  // namespace capex
