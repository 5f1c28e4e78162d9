#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "capex/errors.hpp"
#include "capex/model.hpp"
#include "capex/paths.hpp"
#include "capex/production.hpp"
#include "capex/stats.hpp"
#include "capex/validate.hpp"

namespace capex {

/// How the time integral of the boundary equation is weighted on each cell
/// [t_j, t_{j+1}). Both freeze the integrand at t_j.
enum class Quadrature {
  LeftEndpoint,     // e^{-int_{t_i}^{t_j} bar_mu} * dt_j
  ExponentialCell,  // discount integrated exactly over the cell
};

inline const char* to_string(Quadrature q) { return q == Quadrature::LeftEndpoint ? "left_endpoint" : "exponential_cell"; }

/// Residual of the boundary equation at node i for a frozen batch of Q-paths
/// started at i:
///
///   E^Q[ sum_{j>=i} W_j R~_C(C(t_j) max(b, M_j)) + D G'(C(T) max(b, M_{N-1})) ] - 1/f_C(t_i)
///
/// where M_j = max_{i<i'<=j} yhat(t_i')/C(t_i') comes from the already solved
/// future nodes and b is the candidate at t_i.
class NodeResidual {
 public:
  NodeResidual(const Model& model, const ReducedProfile& profile, std::size_t node, std::span<const double> future,
               const PathBatch& batch, Quadrature quadrature)
      : profile_(&profile), scrap_(&model.scrap), batch_(&batch), node_(node) {
    const TimeGrid& grid = model.grid();
    const auto& coeffs = model.coeffs;
    const std::size_t N = grid.steps();
    detail::require(node < N, "residual node must precede the horizon");
    detail::require(batch.start() == node, "batch must start at the residual node");
    detail::require(batch.length() == N - node + 1, "batch does not span the horizon");
    detail::require(future.size() >= N, "future curve must cover nodes up to N-1");
    for (std::size_t u = node + 1; u < N; ++u) detail::require(future[u] > 0.0, "future boundary values must be positive");

    cells_ = N - node;
    weight_.resize(cells_);
    for (std::size_t j = 0; j < cells_; ++j) {
      const std::size_t u = node + j;
      const double discount = std::exp(-coeffs.integral_bar_mu(node, u));
      const double dt = grid.step(u);
      if (quadrature == Quadrature::LeftEndpoint) {
        weight_[j] = discount * dt;
      } else {
        const double I = coeffs.integral_bar_mu(u, u + 1);
        weight_[j] = discount * (I > 0.0 ? -std::expm1(-I) / I * dt : dt);
      }
    }
    terminal_discount_ = std::exp(-coeffs.integral_bar_mu(node, N));
    inv_f_ = 1.0 / coeffs.f_C(node);

    const std::size_t P = batch.size();
    log_c_.resize(P * (cells_ + 1));
    log_m_.resize(P * cells_);
    constexpr double kNone = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < P; ++p) {
      const auto path = batch.path(p);
      double running = kNone;
      for (std::size_t j = 0; j <= cells_; ++j) {
        const double lc = std::log(path.values[j]);
        log_c_[p * (cells_ + 1) + j] = lc;
        if (j < cells_) {
          if (j > 0) running = std::max(running, std::log(future[node + j]) - lc);
          log_m_[p * cells_ + j] = running;
        }
      }
    }

    fast_ = profile.power_law();
    if (fast_) build_prefix_tables();
  }

  std::size_t node() const noexcept { return node_; }

  /// Monte-Carlo estimate of the residual at `candidate`.
  Estimate operator()(double candidate) const {
    if (!(candidate > 0.0)) throw std::invalid_argument("residual candidate must be positive");
    const std::size_t P = batch_->size();
    samples_.resize(P);
    const double lb = std::log(candidate);
    for (std::size_t p = 0; p < P; ++p) samples_[p] = path_value(p, lb) - inv_f_;
    return batch_->estimate(samples_);
  }

  /// Same quantity summed cell by cell, without prefix tables.
  Estimate direct(double candidate) const {
    if (!(candidate > 0.0)) throw std::invalid_argument("residual candidate must be positive");
    const std::size_t P = batch_->size();
    std::vector<double> s(P);
    const double lb = std::log(candidate);
    for (std::size_t p = 0; p < P; ++p) s[p] = direct_path_value(p, lb) - inv_f_;
    return batch_->estimate(s);
  }

 private:
  double terminal(std::size_t p, double lb) const {
    const double lc = log_c_[p * (cells_ + 1) + cells_];
    const double lm = log_m_[p * cells_ + cells_ - 1];
    return terminal_discount_ * scrap_->marginal(std::exp(lc + std::max(lb, lm)));
  }

  double direct_path_value(std::size_t p, double lb) const {
    double v = 0.0;
    for (std::size_t j = 0; j < cells_; ++j) {
      const double lc = log_c_[p * (cells_ + 1) + j];
      const double lm = log_m_[p * cells_ + j];
      v += weight_[j] * profile_->marginal_log(node_ + j, lc + std::max(lb, lm));
    }
    return v + terminal(p, lb);
  }

  double path_value(std::size_t p, double lb) const {
    if (!fast_ || lb + max_excess_[p] > 0.0) return direct_path_value(p, lb);
    // Cells with M_j < b form a prefix because M_j is a running maximum.
    const auto lm = std::span<const double>(log_m_).subspan(p * cells_, cells_);
    const std::size_t J = static_cast<std::size_t>(std::lower_bound(lm.begin(), lm.end(), lb) - lm.begin());
    const double* pre = &prefix_[p * (cells_ + 1)];
    const double* suf = &suffix_[p * (cells_ + 1)];
    return std::exp(profile_->exponent() * lb) * pre[J] + suf[J] + terminal(p, lb);
  }

  void build_prefix_tables() {
    const std::size_t P = batch_->size();
    const double q = profile_->exponent();
    prefix_.assign(P * (cells_ + 1), 0.0);
    suffix_.assign(P * (cells_ + 1), 0.0);
    max_excess_.assign(P, -std::numeric_limits<double>::infinity());
    for (std::size_t p = 0; p < P; ++p) {
      double* pre = &prefix_[p * (cells_ + 1)];
      double* suf = &suffix_[p * (cells_ + 1)];
      for (std::size_t j = 0; j < cells_; ++j) {
        const std::size_t u = node_ + j;
        const double lc = log_c_[p * (cells_ + 1) + j];
        pre[j + 1] = pre[j] + weight_[j] * std::exp(profile_->log_coefficient(u) + q * lc);
        max_excess_[p] = std::max(max_excess_[p], lc - profile_->log_limit(u));
      }
      for (std::size_t j = cells_; j-- > 0;) {
        const double lm = log_m_[p * cells_ + j];
        const double h =
            std::isfinite(lm) ? weight_[j] * profile_->marginal_log(node_ + j, log_c_[p * (cells_ + 1) + j] + lm) : 0.0;
        suf[j] = suf[j + 1] + h;
      }
    }
  }

  const ReducedProfile* profile_;
  const ScrapSpec* scrap_;
  const PathBatch* batch_;
  std::size_t node_;
  std::size_t cells_ = 0;
  std::vector<double> weight_;
  double terminal_discount_ = 0.0;
  double inv_f_ = 0.0;
  std::vector<double> log_c_;
  std::vector<double> log_m_;
  bool fast_ = false;
  std::vector<double> prefix_;
  std::vector<double> suffix_;
  std::vector<double> max_excess_;
  mutable std::vector<double> samples_;
};

/// One-shot residual at node i for a candidate value.
inline Estimate residual(const Model& model, std::size_t node, double candidate, std::span<const double> future,
                         const PathBatch& batch, Quadrature quadrature = Quadrature::LeftEndpoint) {
  if (!(candidate > 0.0)) throw std::invalid_argument("residual candidate must be positive");
  const ReducedProfile profile(model.production, model.coeffs);
  return NodeResidual(model, profile, node, future, batch, quadrature)(candidate);
}

struct BoundaryOptions {
  double tol_y = 1e-9;  // relative bisection tolerance
  int max_iter = 200;
  std::size_t paths = 20000;
  bool antithetic = true;
  std::uint64_t seed = 20240611;
  unsigned threads = 1;
  Quadrature quadrature = Quadrature::LeftEndpoint;
  bool allow_zero_scrap = false;
  bool audit = true;  // re-estimate each residual on a fresh batch

  static BoundaryOptions deterministic() {
    BoundaryOptions o;
    o.tol_y = 1e-9;
    o.paths = 1;
    o.antithetic = false;
    o.quadrature = Quadrature::ExponentialCell;
    o.audit = false;
    return o;
  }
};

struct BoundaryNode {
  double t = 0.0;
  double yhat = 0.0;
  double residual = 0.0;     // fresh-seed residual at yhat
  double residual_se = 0.0;  // SE of the audit: fresh-batch and root-estimation errors combined
  double audit_se = 0.0;     // SE of the fresh batch alone
  double solve_se = 0.0;     // SE of the frozen-batch residual at yhat
  double slope = 0.0;        // d residual / d y at yhat on the frozen batch
  double yhat_se = 0.0;      // solve_se / |slope|
  int iterations = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

/// Exercise boundary on nodes t_0 .. t_{N-1}.
struct BoundaryCurve {
  std::vector<BoundaryNode> nodes;
  bool monotone_expected = false;  // efficiency condition holds
  bool positive_expected = true;   // Inada production
  Quadrature quadrature = Quadrature::LeftEndpoint;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double tol_y = 0.0;

  std::size_t size() const noexcept { return nodes.size(); }
  double operator[](std::size_t i) const { return nodes[i].yhat; }

  std::vector<double> values() const {
    std::vector<double> v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) v[i] = nodes[i].yhat;
    return v;
  }

  /// Largest upward step yhat[i+1] - yhat[i] beyond `k` standard errors, or 0.
  double worst_monotonicity_excess(double k = 2.0) const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      const double tol = k * std::hypot(nodes[i].yhat_se, nodes[i + 1].yhat_se) + 1e-12 * nodes[i].yhat +
                         2.0 * tol_y * nodes[i].yhat;
      worst = std::max(worst, nodes[i + 1].yhat - nodes[i].yhat - tol);
    }
    return worst;
  }
};

namespace detail {

inline void require_assumptions(const Model& model, bool allow_zero_scrap) {
  const auto report = validate(model.coeffs, model.production, model.scrap);
  if (const auto* bad = report.first_failure(allow_zero_scrap)) {
    throw AssumptionError("assumption " + bad->assumption + " violated: " + bad->detail);
  }
}

struct Root {
  double value;
  double lo;
  double hi;
  int iterations;
};

/// Geometric bracket expansion from `seed`, then bisection in log space.
template <class F>
Root bracket_and_bisect(const F& f, double seed, double tol, int max_iter, std::size_t node) {
  double lo = 0.5 * seed, hi = 2.0 * seed;
  int iters = 0;
  auto fail = [&](const std::string& why) {
    throw SolverError(SolverError::Kind::Bracket, "node " + std::to_string(node) + ": " + why);
  };
  while (f(lo) <= 0.0) {
    hi = lo;
    lo *= 0.5;
    if (lo < 1e-12) fail("residual stays negative down to 1e-12");
    if (++iters > max_iter) fail("bracket expansion exceeded the iteration limit");
  }
  while (f(hi) >= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) fail("residual stays positive up to 1e12");
    if (++iters > max_iter) fail("bracket expansion exceeded the iteration limit");
  }
  const double bracket_lo = lo, bracket_hi = hi;
  while (hi / lo - 1.0 > tol) {
    if (++iters > max_iter) {
      throw SolverError(SolverError::Kind::NonConvergence,
                        "node " + std::to_string(node) + ": no convergence to relative tolerance " + std::to_string(tol));
    }
    const double mid = std::sqrt(lo * hi);
    const double v = f(mid);
    if (v == 0.0) return {mid, bracket_lo, bracket_hi, iters};
    (v > 0.0 ? lo : hi) = mid;
  }
  return {std::sqrt(lo * hi), bracket_lo, bracket_hi, iters};
}

inline constexpr std::uint64_t kSolveStream = 0x501E;
inline constexpr std::uint64_t kAuditStream = 0xA0D1;

inline BoundaryCurve backward_induction(const Model& model, const BoundaryOptions& opts) {
  const TimeGrid& grid = model.grid();
  const std::size_t N = grid.steps();
  const ReducedProfile profile(model.production, model.coeffs);
  const auto report = validate(model.coeffs, model.production, model.scrap);

  BoundaryCurve curve;
  curve.nodes.resize(N);
  curve.monotone_expected = report.efficiency.passed;
  curve.positive_expected = report.find("I1") && report.find("I1")->passed;
  curve.quadrature = opts.quadrature;
  curve.paths = opts.paths;
  curve.seed = opts.seed;
  curve.tol_y = opts.tol_y;

  std::vector<double> yhat(N, 0.0);
  double seed_value = 1.0;
  for (std::size_t i = N; i-- > 0;) {
    SimulationOptions sim{i, opts.paths, Measure::Q, derive_stream(opts.seed, kSolveStream), opts.antithetic,
                          opts.threads};
    const PathBatch batch = simulate(model.coeffs, sim);
    const NodeResidual frozen(model, profile, i, yhat, batch, opts.quadrature);

    const Root root =
        bracket_and_bisect([&](double b) { return frozen(b).mean; }, seed_value, opts.tol_y, opts.max_iter, i);
    yhat[i] = root.value;
    seed_value = root.value;

    BoundaryNode& out = curve.nodes[i];
    out.t = grid[i];
    out.yhat = root.value;
    out.iterations = root.iterations;
    out.bracket_lo = root.lo;
    out.bracket_hi = root.hi;

    const Estimate at_root = frozen(root.value);
    out.solve_se = at_root.se;
    const double h = 1e-3;
    out.slope = (frozen(root.value * (1.0 + h)).mean - frozen(root.value * (1.0 - h)).mean) / (2.0 * h * root.value);
    out.yhat_se = out.slope != 0.0 ? out.solve_se / std::abs(out.slope) : 0.0;

    if (opts.audit) {
      SimulationOptions fresh = sim;
      fresh.seed = derive_stream(opts.seed, kAuditStream);
      const PathBatch audit_batch = simulate(model.coeffs, fresh);
      const Estimate e = NodeResidual(model, profile, i, yhat, audit_batch, opts.quadrature)(root.value);
      out.residual = e.mean;
      out.audit_se = e.se;
      // yhat solves the frozen-batch equation, so it carries that batch's error too.
      out.residual_se = std::hypot(e.se, at_root.se);
    } else {
      out.residual = at_root.mean;
      out.residual_se = out.audit_se = at_root.se;
    }
  }
  return curve;
}

}  // namespace detail

/// Backward induction over nodes with a frozen Q-batch per node, geometric
/// bracketing from the previously solved value, and log-space bisection.
inline BoundaryCurve solve_boundary(const Model& model, const BoundaryOptions& opts = {}) {
  detail::require_assumptions(model, opts.allow_zero_scrap);
  detail::require(opts.paths >= 1 && opts.tol_y > 0.0, "invalid boundary solver options");
  return detail::backward_induction(model, opts);
}

/// The same induction on the single path of a model with sigma = 0.
inline BoundaryCurve deterministic_boundary(const Model& model, BoundaryOptions opts = BoundaryOptions::deterministic()) {
  detail::require(model.coeffs.degenerate(), "deterministic boundary needs sigma = 0");
  detail::require_assumptions(model, opts.allow_zero_scrap);
  opts.paths = 1;
  opts.antithetic = false;
  opts.audit = false;
  return detail::backward_induction(model, opts);
}

}  // namespace capex
