#include <CLI11.hpp>

#include "capex/cli.hpp"

int main(int argc, char** argv) {
  using namespace capex::cli;
  CLI::App app{"Finite-horizon capacity expansion: exercise boundary, optimal investment and checks"};
  app.require_subcommand(1);

  CommandOptions o;
  o.verbosity = verbosity_from_env();
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double y = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", seed, "generator seed (overrides mc.seed)");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--allow-zero-scrap", o.allow_zero_scrap, "accept G = 0");
  };
  auto* solve = app.add_subcommand("solve", "solve for the exercise boundary");
  common(solve);
  solve->add_option("--paths", paths, "Q-paths per node");

  auto* sim = app.add_subcommand("simulate", "simulate optimal plans against benchmarks");
  common(sim);
  sim->add_option("--boundary", o.boundary, "boundary.csv from solve")->required();
  sim->add_option("--paths", paths, "P-paths");
  sim->add_option("--y", y, "initial capacity")->required();

  auto* ver = app.add_subcommand("verify", "first-order conditions and lattice oracle");
  common(ver);
  ver->add_option("--boundary", o.boundary, "boundary.csv from solve")->required();
  ver->add_option("--paths", paths, "P-paths for the FOC estimates");

  auto* orc = app.add_subcommand("oracle", "lattice dynamic programming only");
  common(orc);
  orc->add_option("--boundary", o.boundary, "boundary.csv, used to size the lattice");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  for (auto* sub : {solve, sim, ver, orc}) {
    if (!*sub) continue;
    auto given = [sub](const char* name) {
      const auto* opt = sub->get_option_no_throw(name);
      return opt && opt->count() > 0;
    };
    if (given("--seed")) o.seed = seed;
    if (given("--paths")) o.paths = paths;
    if (given("--y")) o.y = y;
  }

  if (*solve) return guarded([&] { return cmd_solve(o); });
  if (*sim) return guarded([&] { return cmd_simulate(o); });
  if (*ver) return guarded([&] { return cmd_verify(o); });
  return guarded([&] { return cmd_oracle(o); });
}
