#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "capex/boundary.hpp"
#include "capex/errors.hpp"
#include "capex/model.hpp"
#include "capex/paths.hpp"
#include "capex/policy.hpp"
#include "capex/production.hpp"
#include "capex/stats.hpp"

namespace capex {

// ---------------------------------------------------------------------------
// First-order conditions

/// Grid stopping time evaluated causally on the pre-action capacity path.
struct StoppingRule {
  enum class Kind { FixedNode, CapacityHit };
  Kind kind = Kind::FixedNode;
  std::size_t node = 0;  // FixedNode
  double level = 0.0;    // CapacityHit
  std::string label;

  static StoppingRule fixed(std::size_t node) { return {Kind::FixedNode, node, 0.0, "node " + std::to_string(node)}; }
  static StoppingRule hitting(double level, std::string label) {
    return {Kind::CapacityHit, 0, level, std::move(label)};
  }

  /// First node of `pre` (indexed from `start`) at which the rule stops; the
  /// horizon node when it never does. A capacity rule starts watching after
  /// the start node and fires on reaching the other side of its level.
  std::size_t evaluate(std::size_t start, std::span<const double> pre) const {
    const std::size_t horizon = start + pre.size() - 1;
    if (kind == Kind::FixedNode) return std::clamp(node, start, horizon);
    const bool from_above = pre[0] >= level;
    for (std::size_t m = 1; m < pre.size(); ++m) {
      if (from_above ? pre[m] <= level : pre[m] >= level) return start + m;
    }
    return horizon;
  }
};

/// Ten fixed nodes spanning [0, T) and first hits of 0.5, 1 and 2 times yhat(0).
inline std::vector<StoppingRule> stopping_rule_family(std::size_t steps, double yhat0) {
  std::vector<StoppingRule> rules;
  for (std::size_t m = 0; m < 10; ++m) rules.push_back(StoppingRule::fixed(m * steps / 10));
  rules.push_back(StoppingRule::hitting(0.5 * yhat0, "hit 0.5 yhat(0)"));
  rules.push_back(StoppingRule::hitting(yhat0, "hit 1 yhat(0)"));
  rules.push_back(StoppingRule::hitting(2.0 * yhat0, "hit 2 yhat(0)"));
  return rules;
}

namespace detail {

/// Realized supergradient integrand g_k, k = start..N-1, for one path and plan:
///   g_k = (f_C(t_k)/C(t_k)) [ sum_{j>=k} e^{-int mu_F} C(t_j) R~_C(cap_j) W_j + e^{-int mu_F} C(T) G'(cap_N) ]
///         - e^{-int mu_F up to t_k}
class Supergradient {
 public:
  Supergradient(const Model& model, const ReducedProfile& profile, std::size_t start, Quadrature quadrature)
      : model_(&model), profile_(&profile), start_(start) {
    const auto& coeffs = model.coeffs;
    const TimeGrid& grid = model.grid();
    const std::size_t N = grid.steps();
    detail::require(start < N, "supergradient start must precede the horizon");
    disc_.resize(N - start + 1);
    weight_.resize(N - start);
    for (std::size_t k = start; k <= N; ++k) disc_[k - start] = std::exp(-coeffs.integral_mu_F(start, k));
    for (std::size_t k = start; k < N; ++k) {
      double w = grid.step(k);
      if (quadrature == Quadrature::ExponentialCell) {
        const double I = coeffs.integral_bar_mu(k, k + 1);
        if (I > 0.0) w *= -std::expm1(-I) / I;
      }
      weight_[k - start] = disc_[k - start] * w;
    }
  }

  std::vector<double> operator()(PathView path, const InvestmentPlan& plan) const {
    const auto& coeffs = model_->coeffs;
    const std::size_t n = path.values.size();
    const auto cap = controlled_capacity(path, plan);
    std::vector<double> g(n - 1);
    double tail = disc_[n - 1] * path.values[n - 1] * model_->scrap.marginal(cap[n - 1]);
    for (std::size_t m = n - 1; m-- > 0;) {
      const std::size_t node = start_ + m;
      tail += weight_[m] * path.values[m] * profile_->marginal(node, cap[m]);
      g[m] = coeffs.f_C(node) / path.values[m] * tail - disc_[m];
    }
    return g;
  }

 private:
  const Model* model_;
  const ReducedProfile* profile_;
  std::size_t start_;
  std::vector<double> disc_;
  std::vector<double> weight_;
};

inline std::vector<double> pre_action_capacity(PathView path, const InvestmentPlan& plan) {
  std::vector<double> pre(path.values.size());
  for (std::size_t m = 0; m < pre.size(); ++m) pre[m] = path.values[m] * (plan.y + plan.nubar[m]);
  return pre;
}

}  // namespace detail

/// Monte-Carlo estimate of the supergradient of J at the tracking plan, at the
/// stopping time `rule`. Paths that do not stop before T contribute 0.
inline Estimate supergradient_estimate(const Model& model, std::span<const double> curve, double y,
                                       const PathBatch& batch, const StoppingRule& rule,
                                       Quadrature quadrature = Quadrature::LeftEndpoint, unsigned threads = 1) {
  if (batch.measure() != Measure::P) throw std::invalid_argument("supergradient needs a batch under P");
  const ReducedProfile profile(model.production, model.coeffs);
  const detail::Supergradient grad(model, profile, batch.start(), quadrature);
  const std::size_t N = model.grid().steps();
  std::vector<double> samples(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto path = batch.path(k);
      const auto plan = build_control(model.coeffs, curve, path, y);
      const std::size_t tau = rule.evaluate(batch.start(), detail::pre_action_capacity(path, plan));
      samples[k] = tau < N ? grad(path, plan)[tau - batch.start()] : 0.0;
    }
  });
  return batch.estimate(samples);
}

struct FOCEntry {
  double y = 0.0;
  std::string rule;
  Estimate estimate;
  double z = 0.0;              // estimate / SE (signed)
  std::size_t stopped = 0;     // paths with tau < T
  bool passed = false;
};

struct SlacknessEntry {
  double y = 0.0;
  Estimate estimate;
  double z = 0.0;
  double mean_expenditure = 0.0;
  bool passed = false;
};

struct FOCReport {
  std::vector<FOCEntry> rules;
  std::vector<SlacknessEntry> slackness;
  double worst_violation = 0.0;  // largest of the rule z-scores and |slackness z|
  double k = 2.0;

  bool passed() const {
    return std::all_of(rules.begin(), rules.end(), [](const FOCEntry& e) { return e.passed; }) &&
           std::all_of(slackness.begin(), slackness.end(), [](const SlacknessEntry& e) { return e.passed; });
  }
};

struct FOCOptions {
  std::size_t paths = 20000;
  bool antithetic = true;
  std::uint64_t seed = 20240611;
  unsigned threads = 1;
  double k = 2.0;         // SE multiple
  double abs_tol = 1e-8;  // added to k SE; covers deterministic runs with SE = 0
};

namespace detail {

inline double z_score(const Estimate& e) {
  if (e.se > 0.0) return e.mean / e.se;
  if (e.mean == 0.0) return 0.0;
  return e.mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

inline constexpr std::uint64_t kFocStream = 0xF0C;

}  // namespace detail

/// All stopping rules of the family plus the complementary slackness identity,
/// for each initial capacity in `ys`. One P-batch is shared by all y.
inline FOCReport check_foc(const Model& model, const BoundaryCurve& curve, std::span<const double> ys,
                           const FOCOptions& opts = {}) {
  const TimeGrid& grid = model.grid();
  const std::size_t N = grid.steps();
  const auto values = curve.values();
  if (values.size() != N) throw GridMismatch("boundary and grid sizes differ");

  const bool deterministic = model.coeffs.degenerate();
  SimulationOptions sim{0, deterministic ? 1 : opts.paths, Measure::P, derive_stream(opts.seed, detail::kFocStream),
                        deterministic ? false : opts.antithetic, opts.threads};
  const PathBatch batch = simulate(model.coeffs, sim);
  const ReducedProfile profile(model.production, model.coeffs);
  const detail::Supergradient grad(model, profile, 0, curve.quadrature);
  const auto rules = stopping_rule_family(N, values.front());

  FOCReport report;
  report.k = opts.k;
  for (double y : ys) {
    const std::size_t P = batch.size();
    std::vector<std::vector<double>> samples(rules.size(), std::vector<double>(P, 0.0));
    std::vector<std::vector<char>> stopped(rules.size(), std::vector<char>(P, 0));
    std::vector<double> slack(P, 0.0), spend(P, 0.0);

    parallel_for(P, opts.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t p = begin; p < end; ++p) {
        const auto path = batch.path(p);
        const auto plan = build_control(model.coeffs, values, path, y);
        const auto g = grad(path, plan);
        const auto pre = detail::pre_action_capacity(path, plan);
        for (std::size_t r = 0; r < rules.size(); ++r) {
          const std::size_t tau = rules[r].evaluate(0, pre);
          if (tau < N) {
            samples[r][p] = g[tau];
            stopped[r][p] = 1;
          }
        }
        double s = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
          const double dnu = plan.nu[k + 1] - plan.nu[k];
          if (dnu > 0.0) s += g[k] * dnu;
        }
        slack[p] = s;
        spend[p] = plan.nu.back();
      }
    });

    for (std::size_t r = 0; r < rules.size(); ++r) {
      FOCEntry e;
      e.y = y;
      e.rule = rules[r].label;
      e.estimate = batch.estimate(samples[r]);
      e.z = detail::z_score(e.estimate);
      e.stopped = static_cast<std::size_t>(std::count(stopped[r].begin(), stopped[r].end(), 1));
      e.passed = e.estimate.mean <= opts.k * e.estimate.se + opts.abs_tol;
      report.worst_violation = std::max(report.worst_violation, e.z);
      report.rules.push_back(std::move(e));
    }
    SlacknessEntry s;
    s.y = y;
    s.estimate = batch.estimate(slack);
    s.z = detail::z_score(s.estimate);
    s.mean_expenditure = batch.estimate(spend).mean;
    s.passed = std::abs(s.estimate.mean) <= opts.k * s.estimate.se + opts.abs_tol * std::max(1.0, s.mean_expenditure);
    report.worst_violation = std::max(report.worst_violation, std::abs(s.z));
    report.slackness.push_back(s);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Lattice dynamic programming

class LatticeRangeError : public Error {
 public:
  using Error::Error;
};

/// Trinomial law of the log increment over one step: mean m, variance v,
/// jumps m - h, m, m + h with h = sqrt(3 v) and probabilities 1/6, 2/3, 1/6.
/// This matches the first four moments of the normal increment.
struct Trinomial {
  std::array<double, 3> prob{0.0, 1.0, 0.0};
  std::array<double, 3> mult{1.0, 1.0, 1.0};

  static Trinomial from_moments(double mean, double variance) {
    Trinomial t;
    if (variance <= 0.0) {
      t.mult = {std::exp(mean), std::exp(mean), std::exp(mean)};
      return t;
    }
    const double h = std::sqrt(3.0 * variance);
    t.prob = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
    t.mult = {std::exp(mean - h), std::exp(mean), std::exp(mean + h)};
    return t;
  }
};

/// Geometric capacity lattice on the model's time grid.
class Lattice {
 public:
  Lattice(const CoefficientSet& coeffs, double y_min, double y_max, std::size_t nodes)
      : grid_(coeffs.grid()), log_min_(std::log(y_min)), nodes_(nodes) {
    detail::require(y_min > 0.0 && y_max > y_min, "lattice needs 0 < y_min < y_max");
    detail::require(nodes >= 3, "lattice needs at least 3 capacity nodes");
    h_ = (std::log(y_max) - log_min_) / static_cast<double>(nodes - 1);
    y_.resize(nodes);
    for (std::size_t m = 0; m < nodes; ++m) y_[m] = std::exp(log_min_ + h_ * static_cast<double>(m));
    const std::size_t N = grid_.steps();
    shock_P_.reserve(N);
    shock_Q_.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
      const double v = coeffs.integral_sigma2(i, i + 1);
      const double drift = -coeffs.integral_mu_C(i, i + 1);
      shock_P_.push_back(Trinomial::from_moments(drift - 0.5 * v, v));
      shock_Q_.push_back(Trinomial::from_moments(drift + 0.5 * v, v));
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return nodes_; }
  double y(std::size_t m) const { return y_[m]; }
  std::span<const double> capacities() const noexcept { return y_; }
  double log_step() const noexcept { return h_; }
  double cell_ratio() const noexcept { return std::exp(h_); }
  const Trinomial& shock(std::size_t step, Measure m) const { return m == Measure::P ? shock_P_[step] : shock_Q_[step]; }

  /// Linear interpolation in log y of a slice, extrapolating from the edge cells.
  double interpolate(std::span<const double> slice, double y) const {
    const double pos = (std::log(y) - log_min_) / h_;
    const double cell = std::clamp(std::floor(pos), 0.0, static_cast<double>(nodes_ - 2));
    const auto m = static_cast<std::size_t>(cell);
    const double frac = pos - cell;
    return slice[m] + frac * (slice[m + 1] - slice[m]);
  }

 private:
  TimeGrid grid_;
  double log_min_;
  double h_ = 0.0;
  std::size_t nodes_;
  std::vector<double> y_;
  std::vector<Trinomial> shock_P_, shock_Q_;
};

/// Value of the capacity-expansion problem on the lattice and its marginal.
struct DPValue {
  std::vector<std::vector<double>> V;         // [time node][capacity node]
  std::vector<std::vector<double>> marginal;  // central differences; NaN on edge nodes
  std::vector<std::vector<std::size_t>> target;  // post-install node, t_0 .. t_{N-1}
  std::vector<double> boundary;  // lowest post-install level, NaN when nothing is installed
};

/// Stopping value v(t, y) and the boundary read off it.
struct DPStopping {
  std::vector<std::vector<double>> v;
  std::vector<std::vector<char>> stop;
  std::vector<double> boundary;  // largest stopping node, NaN when none
};

namespace detail {

inline double next_expectation(const Lattice& lat, std::span<const double> next, std::size_t step, Measure m, double y) {
  const Trinomial& t = lat.shock(step, m);
  double e = 0.0;
  for (int s = 0; s < 3; ++s) {
    if (t.prob[s] > 0.0) e += t.prob[s] * lat.interpolate(next, y * t.mult[s]);
  }
  return e;
}

inline void central_differences(const Lattice& lat, std::span<const double> V, std::span<double> out) {
  const std::size_t M = lat.size();
  out[0] = out[M - 1] = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t m = 1; m + 1 < M; ++m) out[m] = (V[m + 1] - V[m - 1]) / (lat.y(m + 1) - lat.y(m - 1));
}

}  // namespace detail

/// Backward recursion for V with installs restricted to lattice nodes.
inline DPValue dp_value(const Model& model, const Lattice& lat, unsigned threads = 1) {
  const auto& coeffs = model.coeffs;
  const TimeGrid& grid = coeffs.grid();
  if (!(grid == lat.grid())) throw GridMismatch("lattice and model grids differ");
  const std::size_t N = grid.steps();
  const std::size_t M = lat.size();
  const ReducedProfile profile(model.production, coeffs);

  DPValue out;
  out.V.assign(N + 1, std::vector<double>(M));
  out.marginal.assign(N + 1, std::vector<double>(M));
  out.target.assign(N, std::vector<std::size_t>(M));
  out.boundary.assign(N, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t m = 0; m < M; ++m) out.V[N][m] = model.scrap.value(lat.y(m));

  std::vector<double> cont(M);
  for (std::size_t i = N; i-- > 0;) {
    const double dt = grid.step(i);
    const double disc = std::exp(-coeffs.integral_mu_F(i, i + 1));
    const double inv_f = 1.0 / coeffs.f_C(i);
    const auto& next = out.V[i + 1];
    parallel_for(M, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t m = begin; m < end; ++m) {
        const double y = lat.y(m);
        cont[m] = profile.value(i, y) * dt + disc * detail::next_expectation(lat, next, i, Measure::P, y);
      }
    });
    // max over k >= m of cont[k] - y_k/f, plus y_m/f, by a suffix scan.
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = M - 1;
    for (std::size_t m = M; m-- > 0;) {
      const double net = cont[m] - lat.y(m) * inv_f;
      if (net > best) {
        best = net;
        arg = m;
      }
      out.V[i][m] = best + lat.y(m) * inv_f;
      out.target[i][m] = arg;
      if (arg == M - 1 && m < M - 1) {
        throw LatticeRangeError("lattice too small: optimal install reaches y_max at t = " + std::to_string(grid[i]));
      }
    }
    if (out.target[i][0] > 0) out.boundary[i] = lat.y(out.target[i][0]);
  }
  for (std::size_t i = 0; i <= N; ++i) detail::central_differences(lat, out.V[i], out.marginal[i]);
  return out;
}

/// Backward recursion for the stopping value under Q.
inline DPStopping dp_stopping_value(const Model& model, const Lattice& lat, unsigned threads = 1) {
  const auto& coeffs = model.coeffs;
  const TimeGrid& grid = coeffs.grid();
  if (!(grid == lat.grid())) throw GridMismatch("lattice and model grids differ");
  const std::size_t N = grid.steps();
  const std::size_t M = lat.size();
  const ReducedProfile profile(model.production, coeffs);

  DPStopping out;
  out.v.assign(N + 1, std::vector<double>(M));
  out.stop.assign(N, std::vector<char>(M, 0));
  out.boundary.assign(N, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t m = 0; m < M; ++m) out.v[N][m] = model.scrap.marginal(lat.y(m));

  for (std::size_t i = N; i-- > 0;) {
    const double dt = grid.step(i);
    const double disc = std::exp(-coeffs.integral_bar_mu(i, i + 1));
    const double inv_f = 1.0 / coeffs.f_C(i);
    const auto& next = out.v[i + 1];
    auto& cur = out.v[i];
    auto& stop = out.stop[i];
    parallel_for(M, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t m = begin; m < end; ++m) {
        const double y = lat.y(m);
        const double keep =
            profile.marginal(i, y) * dt + disc * std::max(0.0, detail::next_expectation(lat, next, i, Measure::Q, y));
        stop[m] = keep >= inv_f;
        cur[m] = stop[m] ? inv_f : keep;
      }
    });
    if (stop[M - 1]) {
      throw LatticeRangeError("lattice too small: stopping region reaches y_max at t = " + std::to_string(grid[i]));
    }
    for (std::size_t m = M; m-- > 0;) {
      if (stop[m]) {
        out.boundary[i] = lat.y(m);
        break;
      }
    }
  }
  return out;
}

struct CrossValidation {
  std::vector<double> relative_gap;  // |yhat - yhat_DP| / yhat_DP per node, NaN where unresolved
  double sup_gap = 0.0;
  std::size_t sup_node = 0;
  double sup_gap_cells = 0.0;  // largest |log ratio| in lattice cells
  std::size_t unresolved = 0;  // nodes where the DP boundary is below the lattice
  double value_vs_stopping_gap = 0.0;  // V-based vs v-based boundary, relative sup
};

inline CrossValidation cross_validate(std::span<const double> curve, std::span<const double> dp_boundary,
                                      const Lattice& lat, std::span<const double> value_boundary = {}) {
  if (curve.size() != dp_boundary.size()) throw GridMismatch("boundaries have different lengths");
  CrossValidation cv;
  cv.relative_gap.assign(curve.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (std::isnan(dp_boundary[i])) {
      ++cv.unresolved;
      continue;
    }
    const double gap = std::abs(curve[i] - dp_boundary[i]) / dp_boundary[i];
    cv.relative_gap[i] = gap;
    if (gap > cv.sup_gap) {
      cv.sup_gap = gap;
      cv.sup_node = i;
    }
    cv.sup_gap_cells = std::max(cv.sup_gap_cells, std::abs(std::log(curve[i] / dp_boundary[i])) / lat.log_step());
  }
  if (!value_boundary.empty()) {
    if (value_boundary.size() != dp_boundary.size()) throw GridMismatch("boundaries have different lengths");
    for (std::size_t i = 0; i < dp_boundary.size(); ++i) {
      if (std::isnan(dp_boundary[i]) || std::isnan(value_boundary[i])) continue;
      cv.value_vs_stopping_gap =
          std::max(cv.value_vs_stopping_gap, std::abs(value_boundary[i] - dp_boundary[i]) / dp_boundary[i]);
    }
  }
  return cv;
}

/// Relative gap between the V-marginal and v on nodes m with lo <= m < hi.
inline double shadow_value_gap(const DPValue& value, const DPStopping& stopping, std::size_t lo, std::size_t hi) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < value.V.size(); ++i) {
    for (std::size_t m = std::max<std::size_t>(lo, 1); m < hi && m + 1 < value.V[i].size(); ++m) {
      const double v = stopping.v[i][m];
      worst = std::max(worst, std::abs(value.marginal[i][m] - v) / v);
    }
  }
  return worst;
}

}  // namespace capex
