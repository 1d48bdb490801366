// Command-line front end: convergence, temporal, run and mass-check.
//
//   chemodg convergence --case mm2d --degree 1 --levels 4,8,16,32 --dt 0.25 --out out/k1
//   chemodg temporal --case mm2d --out out/time
//   chemodg run --case plume --levels 40 --dt-policy fixed --dt 1e-4 --tfinal 5e-3 --out out/plume
//   chemodg mass-check --case plume --levels 40 --dt-policy fixed --dt 1e-4 --tfinal 1e-2
//
// Settings are applied in order: defaults, --config file, then flags.
// CHEMODG_WORKERS sets how many runs of a study execute at once.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "chemodg/driver.hpp"

namespace {

using chemodg::RunConfig;

struct FlagSet {
  std::string config;
  std::vector<std::pair<std::string, std::string>> values;  // key, raw value in command-line order
};

void add_flags(CLI::App* cmd, FlagSet& flags) {
  static const std::vector<std::pair<std::string, std::string>> kFlags = {
      {"case", "problem case: mm2d or plume"},
      {"degree", "polynomial degree k (1, 2 or 3)"},
      {"levels", "comma-separated cells per unit length, increasing"},
      {"dt", "time step (fixed) or scale in dt = scale*h^exponent (coupled)"},
      {"dt-policy", "fixed, coupled or coupled:<exponent>"},
      {"tfinal", "final time"},
      {"sigma", "penalty for all three forms"},
      {"out", "output directory"},
      {"snap-every", "snapshot every N steps (0: first and last only)"},
      {"snap-times", "comma-separated snapshot times"},
      {"solver", "direct or gmres"},
      {"dts", "temporal study step sizes, decreasing"},
      {"h-scale", "temporal coupling h = scale*dt^exponent"},
      {"h-exponent", "temporal coupling exponent (default 1/(k+1))"},
  };
  cmd->add_option("--config", flags.config, "key=value settings file");
  for (std::size_t i = 0; i < kFlags.size(); ++i) {
    const std::string key = kFlags[i].first;
    cmd->add_option_function<std::string>(
        "--" + key, [&flags, key](const std::string& v) { flags.values.emplace_back(key, v); }, kFlags[i].second);
  }
}

RunConfig resolve(const FlagSet& flags) {
  RunConfig cfg;
  if (!flags.config.empty()) chemodg::apply_config_file(cfg, flags.config);
  for (const auto& [k, v] : flags.values) chemodg::set_option(cfg, k, v);
  cfg.validate();
  return cfg;
}

int report_study(const char* what, const chemodg::StudyResult& res, const RunConfig& cfg) {
  std::cout << what << ": " << res.table.rows.size() << " run(s) written to " << cfg.out << "/errors.csv\n";
  const auto rates = res.table.rates();
  if (!rates.empty()) {
    std::cout << "finest-pair rates:";
    for (std::size_t c = 0; c < chemodg::kErrorColumns.size(); ++c) {
      std::cout << ' ' << chemodg::kErrorColumns[c] << '=';
      if (rates.back()[c])
        std::cout << *rates.back()[c];
      else
        std::cout << "n/a";
    }
    std::cout << '\n';
  }
  for (const auto& f : res.failures) std::cerr << "failed " << f << '\n';
  return res.exit_code.value_or(chemodg::kExitOk);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discontinuous Galerkin chemotaxis-Navier-Stokes solver"};
  app.require_subcommand(1);

  FlagSet conv_flags, temp_flags, run_flags, mass_flags;
  auto* conv = app.add_subcommand("convergence", "spatial convergence study");
  auto* temp = app.add_subcommand("temporal", "temporal convergence study");
  auto* run = app.add_subcommand("run", "single run with VTK snapshots and mass.csv");
  auto* mass = app.add_subcommand("mass-check", "single run, fails if total mass drifts beyond mass_tol");
  add_flags(conv, conv_flags);
  add_flags(temp, temp_flags);
  add_flags(run, run_flags);
  add_flags(mass, mass_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : chemodg::kExitConfig;
  }

  try {
    if (conv->parsed()) {
      const RunConfig cfg = resolve(conv_flags);
      return report_study("convergence", chemodg::cmd_convergence(cfg, &std::clog), cfg);
    }
    if (temp->parsed()) {
      const RunConfig cfg = resolve(temp_flags);
      return report_study("temporal", chemodg::cmd_temporal(cfg, &std::clog), cfg);
    }
    if (run->parsed()) {
      const RunConfig cfg = resolve(run_flags);
      const auto res = chemodg::cmd_run(cfg, &std::clog);
      std::cout << "run: " << res.snapshots.size() << " snapshot(s), " << res.mass.size()
                << " mass row(s), max relative mass deviation " << res.max_relative_deviation << '\n';
      if (res.exit_code) std::cerr << res.failure << '\n';
      return res.exit_code.value_or(chemodg::kExitOk);
    }
    if (mass->parsed()) {
      const RunConfig cfg = resolve(mass_flags);
      const auto res = chemodg::cmd_mass_check(cfg, &std::clog);
      if (res.exit_code) {
        std::cerr << res.failure << '\n';
        return *res.exit_code;
      }
      const bool ok = res.max_relative_deviation <= cfg.mass_tol;
      std::cout << "mass-check: max relative deviation " << res.max_relative_deviation << " over "
                << res.mass.size() - 1 << " step(s), tolerance " << cfg.mass_tol << (ok ? " PASS" : " FAIL") << '\n';
      return ok ? chemodg::kExitOk : chemodg::kExitCheckFailed;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return chemodg::exit_code_for(e);
  }
  return chemodg::kExitConfig;
}
