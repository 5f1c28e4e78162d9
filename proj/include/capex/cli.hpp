#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capex/boundary.hpp"
#include "capex/config.hpp"
#include "capex/errors.hpp"
#include "capex/io.hpp"
#include "capex/policy.hpp"
#include "capex/validate.hpp"
#include "capex/verify.hpp"

namespace capex::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kAssumptionViolation = 3,
  kNonConvergence = 4,
  kMismatch = 5,
  kVerificationFailed = 6,
};

struct CommandOptions {
  std::string config;
  std::string out = ".";
  std::string boundary;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  unsigned threads = 1;
  std::optional<double> y;
  bool allow_zero_scrap = false;
  int verbosity = 1;  // 0 quiet, 1 progress, 2 detail
};

/// Verbosity from CAPEX_LOG: off/quiet, info (default), debug.
inline int verbosity_from_env() {
  const char* v = std::getenv("CAPEX_LOG");
  if (!v) return 1;
  const std::string s = v;
  if (s == "off" || s == "quiet" || s == "error" || s == "0") return 0;
  if (s == "debug" || s == "trace" || s == "2") return 2;
  return 1;
}

namespace detail {

class Log {
 public:
  explicit Log(int level, std::ostream& os = std::cout) : level_(level), os_(&os) {}
  template <class... Ts>
  void info(const Ts&... xs) const {
    if (level_ >= 1) ((*os_ << xs), ...) << '\n';
  }
  template <class... Ts>
  void debug(const Ts&... xs) const {
    if (level_ >= 2) ((*os_ << xs), ...) << '\n';
  }

 private:
  int level_;
  std::ostream* os_;
};

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline RunConfig load(const CommandOptions& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.boundary.seed = cfg.foc.seed = *o.seed;
  cfg.boundary.threads = cfg.foc.threads = std::max(1u, o.threads);
  cfg.boundary.allow_zero_scrap = o.allow_zero_scrap;
  return cfg;
}

inline void require_valid(const RunConfig& cfg, bool allow_zero_scrap) {
  const auto report = validate(cfg.model.coeffs, cfg.model.production, cfg.model.scrap);
  if (const auto* bad = report.first_failure(allow_zero_scrap)) {
    throw AssumptionError("assumption " + bad->assumption + " violated: " + bad->detail);
  }
}

inline std::filesystem::path out_dir(const CommandOptions& o) {
  std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  return dir;
}

inline BoundaryCurve read_curve(const CommandOptions& o, const RunConfig& cfg) {
  if (o.boundary.empty()) throw ConfigError("--boundary is required");
  BoundaryCurve curve = read_boundary_csv(o.boundary, cfg.hash, cfg.model.grid());
  const auto report = validate(cfg.model.coeffs, cfg.model.production, cfg.model.scrap);
  curve.monotone_expected = report.efficiency.passed;
  curve.positive_expected = report.find("I1") && report.find("I1")->passed;
  return curve;
}

/// Adds this command's section to manifest.json in the output directory.
inline void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& command,
                           nlohmann::json section) {
  const auto path = dir / "manifest.json";
  nlohmann::json m = nlohmann::json::object();
  if (std::ifstream in(path); in) {
    try {
      in >> m;
    } catch (const nlohmann::json::exception&) {
      m = nlohmann::json::object();
    }
  }
  if (m.value("config_hash", cfg.hash) != cfg.hash) m = nlohmann::json::object();
  m["config_hash"] = cfg.hash;
  m["config"] = cfg.document;
  m["runs"][command] = std::move(section);
  std::ofstream(path) << m.dump(2) << '\n';
}

inline nlohmann::json tolerances(const RunConfig& cfg) {
  return {{"tol_y", cfg.boundary.tol_y},
          {"max_iter", cfg.boundary.max_iter},
          {"quadrature", to_string(cfg.boundary.quadrature)},
          {"foc_se_multiple", cfg.foc.k},
          {"foc_abs_tol", cfg.foc.abs_tol},
          {"dp_max_gap", cfg.verify.max_gap}};
}

inline Lattice make_lattice(const RunConfig& cfg, const std::vector<double>* curve) {
  double lo = cfg.verify.y_min, hi = cfg.verify.y_max;
  if ((lo <= 0.0 || hi <= 0.0) && !curve) {
    throw ConfigError("config.verify: y_min and y_max are needed without a boundary file");
  }
  if (curve) {
    const auto [mn, mx] = std::minmax_element(curve->begin(), curve->end());
    if (lo <= 0.0) lo = 0.25 * *mn;
    if (hi <= 0.0) hi = 16.0 * *mx;
  }
  if (!(hi > lo)) throw ConfigError("config.verify: y_max must exceed y_min");
  return Lattice(cfg.model.coeffs, lo, hi, cfg.verify.lattice_nodes);
}

inline constexpr std::uint64_t kSimulateStream = 0x5104;

}  // namespace detail

/// validate, then solve for the boundary; writes boundary.csv and the manifest.
inline int cmd_solve(const CommandOptions& o) {
  detail::Log log(o.verbosity);
  detail::Stopwatch clock;
  RunConfig cfg = detail::load(o);
  if (o.paths) cfg.boundary.paths = *o.paths;
  detail::require_valid(cfg, o.allow_zero_scrap);
  const bool deterministic = cfg.model.coeffs.degenerate();
  log.info("solve: N = ", cfg.model.grid().steps(), ", ", deterministic ? "deterministic" : "Monte Carlo",
           " boundary, quadrature ", to_string(cfg.boundary.quadrature));

  const BoundaryCurve curve =
      deterministic ? deterministic_boundary(cfg.model, cfg.boundary) : solve_boundary(cfg.model, cfg.boundary);
  const auto dir = detail::out_dir(o);
  write_boundary_csv((dir / "boundary.csv").string(), curve, cfg.hash);

  double worst_z = 0.0;
  for (const auto& n : curve.nodes) {
    if (n.residual_se > 0.0) worst_z = std::max(worst_z, std::abs(n.residual) / n.residual_se);
  }
  log.info("solve: yhat(0) = ", format_double(curve[0]), ", yhat(t_{N-1}) = ", format_double(curve.nodes.back().yhat));
  detail::write_manifest(dir, cfg, "solve",
                         {{"seed", cfg.boundary.seed},
                          {"paths", curve.paths},
                          {"antithetic", cfg.boundary.antithetic && !deterministic},
                          {"tolerances", detail::tolerances(cfg)},
                          {"timing_ms", clock.ms()},
                          {"outputs", {"boundary.csv"}},
                          {"summary",
                           {{"yhat_0", curve[0]},
                            {"yhat_last", curve.nodes.back().yhat},
                            {"worst_audit_z", worst_z},
                            {"monotone_expected", curve.monotone_expected},
                            {"worst_monotonicity_excess", curve.worst_monotonicity_excess()}}}});
  return kOk;
}

/// Simulates tracking plans under P; writes controls.csv, paths.csv and the profit report.
inline int cmd_simulate(const CommandOptions& o) {
  detail::Log log(o.verbosity);
  detail::Stopwatch clock;
  RunConfig cfg = detail::load(o);
  if (o.paths) cfg.simulate_paths = *o.paths;
  if (!o.y) throw ConfigError("--y is required");
  if (!(*o.y > 0.0)) throw ConfigError("--y must be positive");
  detail::require_valid(cfg, o.allow_zero_scrap);
  const BoundaryCurve curve = detail::read_curve(o, cfg);
  const auto values = curve.values();
  const Model& model = cfg.model;
  const TimeGrid& grid = model.grid();
  const bool deterministic = model.coeffs.degenerate();

  SimulationOptions sim{0, deterministic ? 1 : cfg.simulate_paths, Measure::P,
                        derive_stream(cfg.boundary.seed, detail::kSimulateStream),
                        cfg.boundary.antithetic && !deterministic, cfg.boundary.threads};
  const PathBatch batch = simulate(model.coeffs, sim);
  const auto plans = build_controls(model.coeffs, values, batch, *o.y, sim.threads);

  std::vector<double> spend(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) spend[k] = plans[k].nu.back();
  const double mean_spend = batch.estimate(spend).mean;
  const double rate = mean_spend / grid.horizon();
  std::vector<InvestmentPlan> zero(batch.size()), constant(batch.size());
  parallel_for(batch.size(), sim.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      zero[k] = zero_plan(model.coeffs, batch.path(k), *o.y);
      constant[k] = constant_rate_plan(model.coeffs, batch.path(k), *o.y, rate);
    }
  });
  const Estimate J = profit(model, batch, plans, sim.threads);
  const Estimate J0 = profit(model, batch, zero, sim.threads);
  const Estimate Jc = profit(model, batch, constant, sim.threads);

  const auto dir = detail::out_dir(o);
  const std::size_t dump = std::min(batch.size(), cfg.dump_paths);
  {
    CsvWriter controls((dir / "controls.csv").string(), {"path_id", "t", "nubar", "nu", "capacity"},
                       {"config_hash=" + cfg.hash});
    CsvWriter paths((dir / "paths.csv").string(), {"path_id", "t", "value", "measure"}, {"config_hash=" + cfg.hash});
    for (std::size_t k = 0; k < dump; ++k) {
      const auto path = batch.path(k);
      const auto cap = controlled_capacity(path, plans[k]);
      for (std::size_t m = 0; m < path.values.size(); ++m) {
        controls.values(k, grid[m], plans[k].nubar[m], plans[k].nu[m], cap[m]);
        paths.values(k, grid[m], path.values[m], to_string(Measure::P));
      }
    }
  }
  auto est = [](const Estimate& e) { return nlohmann::json{{"mean", e.mean}, {"se", e.se}}; };
  log.info("simulate: J(tracking) = ", format_double(J.mean), " (se ", format_double(J.se), ")");
  log.info("simulate: J(zero)     = ", format_double(J0.mean), " (se ", format_double(J0.se), ")");
  log.info("simulate: J(constant) = ", format_double(Jc.mean), " (se ", format_double(Jc.se), ")");
  detail::write_manifest(dir, cfg, "simulate",
                         {{"seed", cfg.boundary.seed},
                          {"paths", batch.size()},
                          {"y", *o.y},
                          {"boundary", o.boundary},
                          {"timing_ms", clock.ms()},
                          {"outputs", {"controls.csv", "paths.csv"}},
                          {"profit",
                           {{"tracking", est(J)},
                            {"zero", est(J0)},
                            {"constant_rate", est(Jc)},
                            {"constant_rate_per_time", rate},
                            {"mean_expenditure", mean_spend}}}});
  return kOk;
}

/// FOC checks, the DP stopping oracle and cross-validation; exit 6 on a hard failure.
inline int cmd_verify(const CommandOptions& o) {
  detail::Log log(o.verbosity);
  detail::Stopwatch clock;
  RunConfig cfg = detail::load(o);
  if (o.paths) cfg.foc.paths = *o.paths;
  detail::require_valid(cfg, o.allow_zero_scrap);
  const BoundaryCurve curve = detail::read_curve(o, cfg);
  const auto values = curve.values();
  const Model& model = cfg.model;
  const TimeGrid& grid = model.grid();
  const std::size_t N = grid.steps();
  const auto dir = detail::out_dir(o);

  nlohmann::json checks = nlohmann::json::array();
  bool ok = true;
  auto check = [&](const std::string& name, bool passed, bool hard, nlohmann::json detail) {
    if (hard && !passed) ok = false;
    detail["name"] = name;
    detail["passed"] = passed;
    detail["hard"] = hard;
    log.info("verify: ", passed ? "PASS " : (hard ? "FAIL " : "WARN "), name);
    checks.push_back(std::move(detail));
  };

  // First-order conditions.
  std::vector<double> ys;
  for (double f : cfg.verify.y_factors) ys.push_back(f * values.front());
  const FOCReport foc = check_foc(model, curve, ys, cfg.foc);
  {
    CsvWriter csv((dir / "foc.csv").string(), {"y", "rule", "mean", "se", "z", "stopped", "passed"},
                  {"config_hash=" + cfg.hash});
    for (const auto& e : foc.rules) csv.values(e.y, e.rule, e.estimate.mean, e.estimate.se, e.z, e.stopped, int(e.passed));
    for (const auto& s : foc.slackness) {
      csv.values(s.y, std::string("slackness"), s.estimate.mean, s.estimate.se, s.z, std::size_t{0}, int(s.passed));
    }
  }
  check("foc", foc.passed(), true, {{"worst_violation_se", foc.worst_violation}, {"se_multiple", foc.k}});

  // Lattice oracle.
  const Lattice lat = detail::make_lattice(cfg, &values);
  std::optional<DPStopping> stopping;
  std::optional<DPValue> value;
  try {
    stopping = dp_stopping_value(model, lat, cfg.foc.threads);
    value = dp_value(model, lat, cfg.foc.threads);
  } catch (const LatticeRangeError& e) {
    check("lattice_range", false, true, {{"detail", e.what()}});
  }
  if (stopping && value) {
    double bound_excess = 0.0, mono_excess = 0.0, time_excess = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double inv_f = 1.0 / model.coeffs.f_C(i);
      for (std::size_t m = 0; m < lat.size(); ++m) {
        bound_excess = std::max(bound_excess, stopping->v[i][m] - inv_f);
        if (m + 1 < lat.size()) mono_excess = std::max(mono_excess, stopping->v[i][m + 1] - stopping->v[i][m]);
        if (i + 1 < N) {
          const double next = stopping->v[i + 1][m] - 1.0 / model.coeffs.f_C(i + 1);
          time_excess = std::max(time_excess, next - (stopping->v[i][m] - inv_f));
        }
      }
    }
    check("v_upper_bound", bound_excess <= 1e-12, true, {{"excess", bound_excess}});
    check("v_monotone_in_y", mono_excess <= 1e-10, true, {{"excess", mono_excess}});
    check("v_minus_cost_nonincreasing_in_t", time_excess <= 1e-6, curve.monotone_expected, {{"excess", time_excess}});

    const CrossValidation cv = cross_validate(values, stopping->boundary, lat, value->boundary);
    {
      CsvWriter csv((dir / "dp_boundary.csv").string(), {"t", "yhat", "yhat_dp", "yhat_value", "relative_gap"},
                    {"config_hash=" + cfg.hash});
      for (std::size_t i = 0; i < N; ++i) {
        csv.values(grid[i], values[i], stopping->boundary[i], value->boundary[i], cv.relative_gap[i]);
      }
    }
    check("dp_boundary_gap", cv.sup_gap <= cfg.verify.max_gap && cv.unresolved == 0, true,
          {{"sup_gap", cv.sup_gap},
           {"sup_node", cv.sup_node},
           {"sup_gap_cells", cv.sup_gap_cells},
           {"unresolved", cv.unresolved},
           {"tolerance", cfg.verify.max_gap}});
    check("value_vs_stopping_boundary", cv.value_vs_stopping_gap <= cfg.verify.max_gap, false,
          {{"gap", cv.value_vs_stopping_gap}});
  }

  nlohmann::json foc_json = nlohmann::json::array();
  for (const auto& e : foc.rules) {
    foc_json.push_back({{"y", e.y}, {"rule", e.rule}, {"mean", e.estimate.mean}, {"se", e.estimate.se}, {"passed", e.passed}});
  }
  for (const auto& s : foc.slackness) {
    foc_json.push_back({{"y", s.y}, {"rule", "slackness"}, {"mean", s.estimate.mean}, {"se", s.estimate.se}, {"passed", s.passed}});
  }
  const nlohmann::json report{{"passed", ok}, {"checks", checks}, {"foc", foc_json}};
  std::ofstream(dir / "verify_report.json") << report.dump(2) << '\n';
  detail::write_manifest(dir, cfg, "verify",
                         {{"seed", cfg.foc.seed},
                          {"paths", cfg.foc.paths},
                          {"boundary", o.boundary},
                          {"lattice", {{"nodes", lat.size()}, {"y_min", lat.y(0)}, {"y_max", lat.y(lat.size() - 1)}}},
                          {"tolerances", detail::tolerances(cfg)},
                          {"timing_ms", clock.ms()},
                          {"outputs", {"foc.csv", "dp_boundary.csv", "verify_report.json"}},
                          {"passed", ok}});
  log.info("verify: ", ok ? "all hard checks passed" : "hard check failed");
  return ok ? kOk : kVerificationFailed;
}

/// Runs both lattice recursions on their own; writes oracle.csv and dp_boundary.csv.
inline int cmd_oracle(const CommandOptions& o) {
  detail::Log log(o.verbosity);
  detail::Stopwatch clock;
  RunConfig cfg = detail::load(o);
  detail::require_valid(cfg, o.allow_zero_scrap);
  std::optional<std::vector<double>> curve;
  if (!o.boundary.empty()) curve = detail::read_curve(o, cfg).values();
  const Lattice lat = detail::make_lattice(cfg, curve ? &*curve : nullptr);
  const Model& model = cfg.model;
  const TimeGrid& grid = model.grid();

  DPStopping stopping;
  DPValue value;
  try {
    stopping = dp_stopping_value(model, lat, cfg.foc.threads);
    value = dp_value(model, lat, cfg.foc.threads);
  } catch (const LatticeRangeError& e) {
    log.info("oracle: ", e.what());
    return kVerificationFailed;
  }
  const auto dir = detail::out_dir(o);
  {
    CsvWriter csv((dir / "oracle.csv").string(), {"t", "y", "V", "dV_dy", "v", "stop"}, {"config_hash=" + cfg.hash});
    for (std::size_t i = 0; i <= grid.steps(); ++i) {
      for (std::size_t m = 0; m < lat.size(); ++m) {
        const int stop = i < grid.steps() ? stopping.stop[i][m] : 0;
        csv.values(grid[i], lat.y(m), value.V[i][m], value.marginal[i][m], stopping.v[i][m], stop);
      }
    }
    CsvWriter b((dir / "dp_boundary.csv").string(), {"t", "yhat_dp", "yhat_value"}, {"config_hash=" + cfg.hash});
    for (std::size_t i = 0; i < grid.steps(); ++i) b.values(grid[i], stopping.boundary[i], value.boundary[i]);
  }
  const std::size_t lo = lat.size() / 10, hi = lat.size() - lat.size() / 10;
  const double shadow = shadow_value_gap(value, stopping, lo, hi);
  log.info("oracle: yhat_dp(0) = ", format_double(stopping.boundary[0]), ", shadow-value gap ", format_double(shadow));
  detail::write_manifest(dir, cfg, "oracle",
                         {{"lattice", {{"nodes", lat.size()}, {"y_min", lat.y(0)}, {"y_max", lat.y(lat.size() - 1)}}},
                          {"timing_ms", clock.ms()},
                          {"outputs", {"oracle.csv", "dp_boundary.csv"}},
                          {"summary", {{"yhat_dp_0", stopping.boundary[0]}, {"shadow_value_gap", shadow}}}});
  return kOk;
}

/// Maps library exceptions onto the exit-code contract.
template <class F>
int guarded(F&& command, std::ostream& err = std::cerr) {
  try {
    return command();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const AssumptionError& e) {
    err << "assumption violation: " << e.what() << '\n';
    return kAssumptionViolation;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const GridMismatch& e) {
    err << "mismatch: " << e.what() << '\n';
    return kMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace capex::cli
