#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "capex/errors.hpp"
#include "capex/model.hpp"
#include "capex/random.hpp"
#include "capex/stats.hpp"

namespace capex {

/// P is the physical measure; Q is the measure with the capacity-weighted density.
enum class Measure { P, Q };

inline const char* to_string(Measure m) { return m == Measure::P ? "P" : "Q"; }

/// Read-only view of one trajectory C^s(t_i), i = start..N, indexed by grid node.
struct PathView {
  std::size_t start = 0;
  std::span<const double> values;

  double at(std::size_t node) const { return values[node - start]; }
  std::size_t last() const { return start + values.size() - 1; }
};

/// One simulated trajectory of the uncontrolled decay factor; values[0] = 1.
struct CapacityPath {
  std::size_t start = 0;
  Measure measure = Measure::P;
  std::uint64_t stream = 0;
  std::vector<double> values;

  PathView view() const { return {start, values}; }
};

struct SimulationOptions {
  std::size_t start = 0;
  std::size_t paths = 1;
  Measure measure = Measure::P;
  std::uint64_t seed = 0;
  bool antithetic = false;
  unsigned threads = 1;
};

/// Paths sharing a start node, measure and generator seed, stored contiguously.
class PathBatch {
 public:
  PathBatch(SimulationOptions opts, std::size_t length)
      : opts_(opts), length_(length), data_(opts.paths * length, 0.0) {}

  std::size_t size() const noexcept { return opts_.paths; }
  std::size_t start() const noexcept { return opts_.start; }
  std::size_t length() const noexcept { return length_; }
  Measure measure() const noexcept { return opts_.measure; }
  bool antithetic() const noexcept { return opts_.antithetic; }
  const SimulationOptions& options() const noexcept { return opts_; }

  PathView path(std::size_t k) const { return {opts_.start, std::span<const double>(data_).subspan(k * length_, length_)}; }

  std::span<double> mutable_path(std::size_t k) { return std::span<double>(data_).subspan(k * length_, length_); }

  /// Depends on (seed, path index) only, so batches started at different
  /// nodes reuse the same draws.
  std::uint64_t stream(std::size_t k) const { return derive_stream(opts_.seed, opts_.antithetic ? k / 2 : k); }

  CapacityPath extract(std::size_t k) const {
    const auto v = path(k);
    return {opts_.start, opts_.measure, stream(k), std::vector<double>(v.values.begin(), v.values.end())};
  }

  /// Mean and SE over paths of per-path samples, honouring antithetic pairing.
  Estimate estimate(std::span<const double> per_path) const {
    detail::require(per_path.size() == size(), "one sample per path expected");
    return capex::estimate(per_path, opts_.antithetic);
  }

 private:
  SimulationOptions opts_;
  std::size_t length_;
  std::vector<double> data_;
};

/// Exact lognormal stepping of C^s from node `start`:
/// log C(t_{i+1}) - log C(t_i) ~ Normal(m_i, v_i), v_i = int sigma^2,
/// m_i = -int mu_C - v_i/2 under P and v_i/2 - int mu_C under Q.
inline PathBatch simulate(const CoefficientSet& coeffs, const SimulationOptions& opts) {
  const TimeGrid& grid = coeffs.grid();
  detail::require(opts.paths >= 1, "simulate needs at least one path");
  detail::require(opts.start < grid.steps(), "start node must precede the horizon");
  detail::require(!opts.antithetic || opts.paths % 2 == 0, "antithetic batches need an even path count");

  const std::size_t length = grid.size() - opts.start;
  PathBatch batch(opts, length);

  // Drift and deviation of each step, from cumulative integrals so that a
  // deterministic path reproduces exp(-int mu_C) without accumulated rounding.
  std::vector<double> log_drift(length, 0.0);
  std::vector<double> step_sd(length, 0.0);
  const double sign = opts.measure == Measure::P ? -0.5 : 0.5;
  for (std::size_t m = 1; m < length; ++m) {
    const std::size_t node = opts.start + m;
    log_drift[m] = -coeffs.integral_mu_C(opts.start, node) + sign * coeffs.integral_sigma2(opts.start, node);
    step_sd[m] = std::sqrt(coeffs.integral_sigma2(node - 1, node));
  }

  parallel_for(opts.paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      NormalStream normals(batch.stream(k));
      const double flip = (opts.antithetic && (k % 2 == 1)) ? -1.0 : 1.0;
      auto out = batch.mutable_path(k);
      out[0] = 1.0;
      double noise = 0.0;
      for (std::size_t m = 1; m < length; ++m) {
        if (step_sd[m] > 0.0) noise += flip * step_sd[m] * normals.next();
        out[m] = std::exp(log_drift[m] + noise);
      }
    }
  });
  return batch;
}

/// S[k] = max over from <= i < k of curve[i] / C[i], for k = from+1 .. last node.
class RunningSup {
 public:
  RunningSup(std::size_t from, std::vector<double> values) : from_(from), values_(std::move(values)) {}

  double at(std::size_t k) const { return values_[k - from_ - 1]; }
  std::size_t from() const noexcept { return from_; }
  std::size_t last() const noexcept { return from_ + values_.size(); }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t from_;
  std::vector<double> values_;
};

/// Left-open running supremum of curve/C, updated in O(1) per node.
inline RunningSup running_sup_ratio(PathView path, std::span<const double> curve, std::size_t from) {
  detail::require(from >= path.start, "running sup must start on the path");
  if (from >= path.last()) throw std::invalid_argument("running_sup_ratio: empty index range");
  detail::require(curve.size() >= path.last(), "curve must be defined up to the node before the path ends");
  std::vector<double> s;
  s.reserve(path.last() - from);
  double running = 0.0;
  for (std::size_t i = from; i < path.last(); ++i) {
    running = std::max(running, curve[i] / path.at(i));
    s.push_back(running);
  }
  return RunningSup(from, std::move(s));
}

}  // namespace capex
