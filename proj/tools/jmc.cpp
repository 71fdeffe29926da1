// Command-line driver: evaluates relaxation experiments described by JSON
// configs and writes CSV/JSON artifacts. Outputs are deterministic for a
// fixed config and seed regardless of --threads.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "jmc/jmc.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_config) {
  if (needs_config)
    cmd->add_option("config", o.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out", o.out, "output path (surface: base name, one CSV per partition)");
  cmd->add_option("--threads", o.threads, "worker threads for grid evaluation")
      ->check(CLI::PositiveNumber);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw jmc::Error("cannot open output file: " + path);
  return os;
}

int cmd_surface(const CommonOpts& o) {
  const jmc::ExperimentConfig cfg = jmc::load_config(o.config_path);
  const std::uint64_t seed = o.seed.value_or(cfg.seed);
  const jmc::SurfaceResult res = jmc::run_surface(cfg, seed, o.threads);
  if (o.out) {
    for (const std::string& p : jmc::write_surface_csvs(*o.out, res))
      std::cout << "wrote " << p << "\n";
  } else {
    for (const auto& t : res.tables) {
      std::cout << "# partition " << t.cells << " cells\n";
      jmc::write_surface_csv(std::cout, t);
    }
  }
  for (const auto& t : res.tables)
    std::cout << "partition " << t.cells << " cells: max gap " << jmc::g17(t.max_gap) << "\n";
  return 0;
}

int cmd_convergence(const CommonOpts& o) {
  const jmc::ExperimentConfig cfg = jmc::load_config(o.config_path);
  const jmc::ConvergenceResult res = jmc::run_convergence(cfg, o.threads);
  if (o.out) {
    auto os = open_out(*o.out);
    jmc::write_convergence_csv(os, res);
    std::cout << "wrote " << *o.out << "\n";
  } else {
    jmc::write_convergence_csv(std::cout, res);
  }
  for (const auto& n : res.notes) std::cout << "note: " << n << "\n";
  if (res.fitted)
    std::cout << "fitted log-log slope over rungs [" << res.fit_first << ", " << res.fit_last
              << "]: " << jmc::g17(res.slope) << "\n";
  return 0;
}

int cmd_bounds(const CommonOpts& o) {
  const jmc::ExperimentConfig cfg = jmc::load_config(o.config_path);
  const std::uint64_t seed = o.seed.value_or(cfg.seed);
  const jmc::BoundsResult res = jmc::run_bounds(cfg, seed);
  if (o.out) {
    auto os = open_out(*o.out);
    jmc::write_bounds_json(os, res);
    std::cout << "wrote " << *o.out << "\n";
  } else {
    jmc::write_bounds_json(std::cout, res);
  }
  std::cout << "bounds [" << jmc::g17(res.lower) << ", " << jmc::g17(res.upper)
            << "] vs sample mean " << jmc::g17(res.mc_value) << " +/- "
            << jmc::g17(res.mc_halfwidth) << ": " << (res.passed ? "pass" : "FAIL") << "\n";
  return res.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finitely computable convex/concave bounds for expected-value functions"};
  app.require_subcommand(1);

  CommonOpts surface_opts, convergence_opts, bounds_opts;
  CLI::App* surface = app.add_subcommand("surface", "relaxation surfaces on an x-grid (CSV)");
  add_common(surface, surface_opts, true);
  CLI::App* convergence =
      app.add_subcommand("convergence", "cv/cc gap on a shrinking box ladder (CSV + slope)");
  add_common(convergence, convergence_opts, true);
  CLI::App* bounds = app.add_subcommand("bounds", "point bound certificate (JSON)");
  add_common(bounds, bounds_opts, true);
  app.add_subcommand("selftest", "run the built-in property suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (surface->parsed()) return cmd_surface(surface_opts);
    if (convergence->parsed()) return cmd_convergence(convergence_opts);
    if (bounds->parsed()) return cmd_bounds(bounds_opts);
    return jmc::run_selftest(std::cout) == 0 ? 0 : 1;
  } catch (const jmc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
