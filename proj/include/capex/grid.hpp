#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "capex/errors.hpp"

namespace capex {

/// Strictly increasing time nodes 0 = t_0 < t_1 < ... < t_N = T.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    detail::require(nodes_.size() >= 2, "time grid needs at least two nodes");
    detail::require(nodes_.front() == 0.0, "time grid must start at 0");
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
      detail::require(std::isfinite(nodes_[i + 1]) && nodes_[i + 1] > nodes_[i],
                      "time grid nodes must be strictly increasing");
    }
  }

  static TimeGrid uniform(double horizon, std::size_t steps) {
    detail::require(horizon > 0.0 && std::isfinite(horizon), "horizon must be positive");
    detail::require(steps >= 1, "uniform grid needs at least one step");
    std::vector<double> nodes(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
    }
    nodes.back() = horizon;
    return TimeGrid(std::move(nodes));
  }

  /// Number of steps N (nodes are indexed 0..N).
  std::size_t steps() const noexcept { return nodes_.size() - 1; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double horizon() const noexcept { return nodes_.back(); }

  double operator[](std::size_t i) const { return nodes_[i]; }
  double step(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
  std::span<const double> nodes() const noexcept { return nodes_; }

  /// Index i with t_i <= t < t_{i+1}; the last cell is closed on the right.
  std::size_t cell(double t) const {
    detail::require(t >= 0.0 && t <= horizon(), "time outside the grid");
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
    return std::min(i == 0 ? 0 : i - 1, steps() - 1);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> nodes_;
};

}  // namespace capex
