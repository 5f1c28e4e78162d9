#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capex/boundary.hpp"
#include "capex/errors.hpp"
#include "capex/model.hpp"
#include "capex/verify.hpp"

namespace capex {

/// Lattice and report settings for `verify` and `oracle`.
struct VerifySettings {
  std::size_t lattice_nodes = 200;
  double y_min = 0.0;  // 0: derived from the boundary
  double y_max = 0.0;
  std::vector<double> y_factors{0.5, 2.0};  // FOC initial capacities, as multiples of yhat(0)
  double max_gap = 0.10;                    // DP cross-validation tolerance
};

struct RunConfig {
  Model model;
  BoundaryOptions boundary;
  FOCOptions foc;
  VerifySettings verify;
  std::size_t simulate_paths = 10000;
  std::size_t dump_paths = 100;  // paths written to controls.csv and paths.csv
  nlohmann::json document;  // as parsed
  std::string hash;         // FNV-1a of the canonical dump
};

namespace detail {

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Object reader that remembers which keys were consumed and rejects the rest.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_->contains(key)) throw ConfigError(where(key) + ": missing required field");
    return j_->at(key);
  }

  double number(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : mark(key, fallback); }

  std::uint64_t count(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where(key) + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) { return has(key) ? count(key) : mark(key, fallback); }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return mark(key, fallback);
    const auto& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : mark(key, fallback); }

  Section sub(const std::string& key) { return Section(raw(key), where(key)); }

  std::string where(const std::string& key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& [key, value] : j_->items()) {
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

 private:
  template <class T>
  T mark(const std::string& key, T v) {
    seen_.insert(key);
    return v;
  }

  const nlohmann::json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Samples of one coefficient: a number, a node array, or {"type": "exponential", "scale", "rate"}.
/// The exponential form also yields its exact derivative.
inline std::vector<double> coefficient(const nlohmann::json& v, const std::string& where, const TimeGrid& grid,
                                       std::vector<double>* derivative = nullptr) {
  const std::size_t n = grid.size();
  if (v.is_number()) {
    if (derivative) derivative->assign(n, 0.0);
    return std::vector<double>(n, v.get<double>());
  }
  if (v.is_array()) {
    if (v.size() != n) {
      throw ConfigError(where + ": expected " + std::to_string(n) + " node values, got " + std::to_string(v.size()));
    }
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(where + ": node values must be numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  Section s(v, where);
  const std::string type = s.text("type");
  if (type != "exponential") throw ConfigError(s.where("type") + ": unknown coefficient form '" + type + "'");
  const double scale = s.number("scale");
  const double rate = s.number("rate");
  s.finish();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scale * std::exp(rate * grid[i]);
  if (derivative) {
    derivative->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*derivative)[i] = rate * out[i];
  }
  return out;
}

inline ProductionSpec production(Section s) {
  const std::string type = s.text("type");
  ProductionSpec out;
  if (type == "cobb_douglas") {
    CobbDouglas cd;
    cd.alpha = s.number("alpha");
    cd.beta = s.number("beta");
    cd.gamma = s.number("gamma");
    cd.kappa_L = s.number("kappa_L", cd.kappa_L);
    cd.kappa_K = s.number("kappa_K", cd.kappa_K);
    out = cd;
  } else if (type == "power_marginal") {
    const double scale = s.number("scale");
    const double exponent = s.number("exponent");
    if (!(scale > 0.0 && exponent > 0.0)) throw ConfigError(s.path() + ": scale and exponent must be positive");
    out = SyntheticMarginal::power_law(scale, exponent);
  } else {
    throw ConfigError(s.where("type") + ": unknown production type '" + type + "'");
  }
  s.finish();
  return out;
}

inline ScrapSpec scrap(Section s) {
  const std::string type = s.text("type");
  ScrapSpec out;
  if (type == "zero") {
    out = ScrapSpec(ZeroScrap{});
  } else if (type == "saturating_exponential") {
    const double a = s.number("a");
    const double b = s.number("b");
    if (!(a > 0.0 && b > 0.0)) throw ConfigError(s.path() + ": a and b must be positive");
    out = ScrapSpec(SaturatingExponential{a, b});
  } else {
    throw ConfigError(s.where("type") + ": unknown scrap type '" + type + "'");
  }
  s.finish();
  return out;
}

inline Quadrature quadrature(const std::string& name, const std::string& where) {
  if (name == "left_endpoint") return Quadrature::LeftEndpoint;
  if (name == "exponential_cell") return Quadrature::ExponentialCell;
  throw ConfigError(where + ": unknown quadrature '" + name + "'");
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) line += text[k] == '\n';
  return line;
}

}  // namespace detail

/// Builds a run configuration from JSON text. Every error is a ConfigError
/// naming the offending field (or line, for syntax errors).
inline RunConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
  }

  detail::Section root(doc, "config");
  auto g = root.sub("grid");
  const double T = g.number("T");
  const auto N = g.count("N");
  g.finish();
  if (!(T > 0.0)) throw ConfigError("config.grid.T: horizon must be positive");
  if (N < 1) throw ConfigError("config.grid.N: need at least one step");
  TimeGrid grid = TimeGrid::uniform(T, N);

  auto c = root.sub("coefficients");
  CoefficientSamples samples;
  std::vector<double> f_prime;
  samples.mu_C = detail::coefficient(c.raw("mu_C"), c.where("mu_C"), grid);
  samples.sigma = detail::coefficient(c.raw("sigma"), c.where("sigma"), grid);
  samples.f_C = detail::coefficient(c.raw("f_C"), c.where("f_C"), grid, &f_prime);
  samples.mu_F = detail::coefficient(c.raw("mu_F"), c.where("mu_F"), grid);
  samples.w = c.has("w") ? detail::coefficient(c.raw("w"), c.where("w"), grid) : std::vector<double>(grid.size(), 1.0);
  samples.r = c.has("r") ? detail::coefficient(c.raw("r"), c.where("r"), grid) : std::vector<double>(grid.size(), 1.0);
  if (c.has("f_C_prime")) {
    samples.f_C_prime = detail::coefficient(c.raw("f_C_prime"), c.where("f_C_prime"), grid);
  } else if (!c.raw("f_C").is_array()) {
    samples.f_C_prime = f_prime;
  }
  AssumptionBounds bounds;
  if (c.has("bounds")) {
    auto b = c.sub("bounds");
    bounds.k_f = b.number("k_f", bounds.k_f);
    bounds.kappa_f = b.number("kappa_f", bounds.kappa_f);
    bounds.k_w = b.number("k_w", bounds.k_w);
    bounds.kappa_w = b.number("kappa_w", bounds.kappa_w);
    bounds.k_r = b.number("k_r", bounds.k_r);
    bounds.kappa_r = b.number("kappa_r", bounds.kappa_r);
    bounds.eps_o = b.number("eps_o", bounds.eps_o);
    b.finish();
  }
  c.finish();

  RunConfig cfg{Model{CoefficientSet(grid, std::move(samples), bounds), detail::production(root.sub("production")),
                      detail::scrap(root.sub("scrap"))},
                {}, {}, {}, 10000, 100, doc, detail::fnv1a_hex(doc.dump())};

  if (cfg.model.coeffs.degenerate()) cfg.boundary = BoundaryOptions::deterministic();
  if (root.has("tolerances")) {
    auto t = root.sub("tolerances");
    cfg.boundary.tol_y = t.number("tol_y", cfg.boundary.tol_y);
    cfg.boundary.max_iter = static_cast<int>(t.count("max_iter", cfg.boundary.max_iter));
    if (t.has("quadrature")) cfg.boundary.quadrature = detail::quadrature(t.text("quadrature"), t.where("quadrature"));
    cfg.foc.k = t.number("foc_se_multiple", cfg.foc.k);
    cfg.foc.abs_tol = t.number("foc_abs_tol", cfg.foc.abs_tol);
    t.finish();
    if (!(cfg.boundary.tol_y > 0.0)) throw ConfigError("config.tolerances.tol_y: must be positive");
  }
  if (root.has("mc")) {
    auto m = root.sub("mc");
    cfg.boundary.paths = m.count("paths", cfg.boundary.paths);
    cfg.boundary.seed = m.count("seed", cfg.boundary.seed);
    cfg.boundary.antithetic = m.flag("antithetic", cfg.boundary.antithetic);
    cfg.foc.paths = m.count("foc_paths", cfg.boundary.paths);
    cfg.simulate_paths = m.count("simulate_paths", cfg.simulate_paths);
    cfg.dump_paths = m.count("dump_paths", cfg.dump_paths);
    m.finish();
  } else {
    cfg.foc.paths = cfg.boundary.paths;
  }
  cfg.foc.seed = cfg.boundary.seed;
  cfg.foc.antithetic = cfg.boundary.antithetic;
  if (cfg.boundary.paths < 1) throw ConfigError("config.mc.paths: need at least one path");
  if (cfg.boundary.antithetic && !cfg.model.coeffs.degenerate() &&
      (cfg.boundary.paths % 2 || cfg.foc.paths % 2 || cfg.simulate_paths % 2)) {
    throw ConfigError("config.mc: antithetic sampling needs even path counts");
  }
  if (root.has("verify")) {
    auto v = root.sub("verify");
    cfg.verify.lattice_nodes = v.count("lattice_nodes", cfg.verify.lattice_nodes);
    cfg.verify.y_min = v.number("y_min", 0.0);
    cfg.verify.y_max = v.number("y_max", 0.0);
    cfg.verify.max_gap = v.number("max_gap", cfg.verify.max_gap);
    if (v.has("y_factors")) {
      const auto& ys = v.raw("y_factors");
      if (!ys.is_array() || ys.empty()) throw ConfigError(v.where("y_factors") + ": expected a nonempty array");
      cfg.verify.y_factors.clear();
      for (const auto& y : ys) {
        if (!y.is_number() || !(y.get<double>() > 0.0)) throw ConfigError(v.where("y_factors") + ": entries must be positive");
        cfg.verify.y_factors.push_back(y.get<double>());
      }
    }
    v.finish();
    if (cfg.verify.lattice_nodes < 3) throw ConfigError("config.verify.lattice_nodes: need at least 3");
  }
  root.finish();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace capex
