#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <thread>
#include <vector>

#include "capex/errors.hpp"

namespace capex {

/// Monte-Carlo mean with its standard error.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Pairwise (cascade) summation; the result depends only on the input order.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

/// Mean and standard error. With `antithetic`, consecutive pairs are averaged
/// first and treated as single independent samples.
inline Estimate estimate(std::span<const double> samples, bool antithetic = false) {
  detail::require(!samples.empty(), "estimate needs at least one sample");
  std::vector<double> pooled;
  if (antithetic) {
    detail::require(samples.size() % 2 == 0, "antithetic samples must come in pairs");
    pooled.resize(samples.size() / 2);
    for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] = 0.5 * (samples[2 * k] + samples[2 * k + 1]);
  } else {
    pooled.assign(samples.begin(), samples.end());
  }
  const double n = static_cast<double>(pooled.size());
  const double mean = pairwise_sum(pooled) / n;
  if (pooled.size() < 2) return {mean, 0.0};
  std::vector<double> sq(pooled.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) sq[k] = (pooled[k] - mean) * (pooled[k] - mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

/// Runs fn(begin, end) on contiguous chunks of [0, n) using up to `threads`
/// workers. Callers write per-index results, so output is independent of the
/// worker count.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> x, double q) {
  detail::require(!x.empty(), "quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace capex
