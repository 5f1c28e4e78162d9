#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "capex/boundary.hpp"
#include "capex/errors.hpp"
#include "capex/grid.hpp"

namespace capex {

/// 17 significant digits: round-trips every double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header, const std::vector<std::string>& comments = {})
      : out_(path) {
    if (!out_) throw Error("cannot write " + path);
    for (const auto& c : comments) out_ << "# " << c << '\n';
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

  template <class... Ts>
  void values(const Ts&... xs) {
    std::vector<std::string> cells;
    (cells.push_back(cell(xs)), ...);
    row(cells);
  }

 private:
  static std::string cell(double x) { return format_double(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
  static std::enable_if_t<std::is_integral_v<I>, std::string> cell(I i) {
    return std::to_string(i);
  }

  std::ofstream out_;
};

inline void write_boundary_csv(const std::string& path, const BoundaryCurve& curve, const std::string& config_hash) {
  CsvWriter csv(path, {"t", "yhat", "residual", "residual_se", "iters"},
                {"config_hash=" + config_hash, std::string("quadrature=") + to_string(curve.quadrature)});
  for (const auto& n : curve.nodes) csv.values(n.t, n.yhat, n.residual, n.residual_se, n.iterations);
}

/// Reads a boundary file written by write_boundary_csv and checks it against
/// the config hash and grid. Only t, yhat and iters are restored.
inline BoundaryCurve read_boundary_csv(const std::string& path, const std::string& config_hash, const TimeGrid& grid) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open boundary file " + path);
  BoundaryCurve curve;
  std::string line;
  std::string hash;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "config_hash") hash = value;
      if (key == "quadrature") {
        curve.quadrature = value == "exponential_cell" ? Quadrature::ExponentialCell : Quadrature::LeftEndpoint;
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw GridMismatch(path + ": malformed row '" + line + "'");
    BoundaryNode n;
    n.t = std::stod(cells[0]);
    n.yhat = std::stod(cells[1]);
    n.residual = std::stod(cells[2]);
    n.residual_se = std::stod(cells[3]);
    n.iterations = std::stoi(cells[4]);
    curve.nodes.push_back(n);
  }
  if (hash != config_hash) throw GridMismatch(path + ": config hash " + hash + " does not match " + config_hash);
  if (curve.nodes.size() != grid.steps()) throw GridMismatch(path + ": node count does not match the grid");
  for (std::size_t i = 0; i < curve.nodes.size(); ++i) {
    if (std::abs(curve.nodes[i].t - grid[i]) > 1e-12 * std::max(1.0, grid.horizon())) {
      throw GridMismatch(path + ": node times do not match the grid");
    }
    if (!(curve.nodes[i].yhat > 0.0)) throw GridMismatch(path + ": boundary values must be positive");
  }
  return curve;
}

}  // namespace capex
