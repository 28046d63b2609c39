#pragma once

// Command-line front end: run, steady, check, sweep.
//
// Exit codes: 0 success, 1 property or run failure, 2 configuration error.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sepnp/checks.hpp"
#include "sepnp/config.hpp"
#include "sepnp/diagnostics.hpp"
#include "sepnp/output.hpp"
#include "sepnp/version.hpp"

namespace sepnp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

inline constexpr const char* kOutputDirEnv = "SEPNP_OUTPUT_DIR";

// Command-line settings that override the scenario or config file.
struct CliOverrides {
  std::string scenario = "calcium";
  std::optional<double> dt;
  std::optional<std::size_t> cells;
  std::optional<std::size_t> max_steps;
  std::optional<double> steady_tol;
  std::optional<double> newton_tol;
  std::optional<std::string> out;
  std::optional<std::size_t> cadence;
  bool area_weighted = false;
  std::optional<std::string> poisson_area_weighting;  // on | off
  std::optional<std::string> boundary_closure;        // full-cell | half-cell
  bool no_flux = false;
};

inline bool looks_like_path(const std::string& s) {
  return s.find('/') != std::string::npos || s.find('.') != std::string::npos || std::filesystem::is_regular_file(s);
}

// Preset name or config file, then command-line overrides on top.
inline RunConfig resolve_run_config(const CliOverrides& cli) {
  RunConfig cfg;
  if (const auto p = preset_from_string(cli.scenario)) {
    if (*p == Preset::Custom) throw ConfigError("scenario", "custom scenarios need a config file");
    cfg.preset = *p;
  } else if (looks_like_path(cli.scenario)) {
    cfg = load_config(cli.scenario);
  } else {
    throw ConfigError("scenario", "unknown scenario '" + cli.scenario + "'");
  }
  if (cli.dt) cfg.overrides.dt = *cli.dt;
  if (cli.cells) cfg.overrides.n_cells = *cli.cells;
  if (cli.max_steps) cfg.max_steps = *cli.max_steps;
  if (cli.steady_tol) cfg.overrides.steady_tolerance = *cli.steady_tol;
  if (cli.newton_tol) cfg.overrides.newton_tolerance = *cli.newton_tol;
  if (cli.cadence) cfg.output.cadence = *cli.cadence;
  if (cli.area_weighted) cfg.output.area_weighted = true;
  if (cli.poisson_area_weighting) cfg.overrides.poisson_area_weighting = *cli.poisson_area_weighting == "on";
  if (cli.boundary_closure)
    cfg.overrides.closure = *cli.boundary_closure == "half-cell" ? BoundaryClosure::HalfCell : BoundaryClosure::FullCell;
  if (cli.no_flux) cfg.overrides.boundary_mode = BoundaryMode::NoFlux;
  if (cli.out) {
    cfg.output.directory = *cli.out;
  } else if (!cfg.output.directory_given) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output.directory = env;
  }
  cfg.resolve();
  return cfg;
}

// Creates the output directory and makes sure files can be written there.
inline void prepare_output_dir(const std::filesystem::path& dir) {
  try {
    ensure_directory(dir);
    write_file_atomic(dir / ".write-probe", "");
    std::filesystem::remove(dir / ".write-probe");
  } catch (const IoError& e) {
    throw ConfigError("output.dir", e.what());
  }
}

namespace detail {

inline void summarize(std::ostream& out, const RunResult& r) {
  out << "termination: " << to_string(r.termination) << " after " << r.reports.size() << " steps";
  if (!r.reports.empty()) out << ", t = " << format_number(r.reports.back().time) << ", err_k = " << format_number(r.reports.back().err);
  out << "\n";
  if (r.dt_reductions) out << "dt reductions: " << r.dt_reductions << "\n";
  if (!r.diagnostic.empty()) out << "diagnostic: " << r.diagnostic << "\n";
}

}  // namespace detail

// Two passes: the first finds the end state, the second measures the trajectory
// against it. Writes every output file.
inline int command_run(const RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir = cfg.output.directory;
  prepare_output_dir(dir);
  const ProfileRecorder profiles(dir, cfg.scenario, cfg.output.cadence);
  profiles.write_initial(initial_state(cfg.scenario).first);
  const RunAnalysis a = analyze_run(cfg.scenario, cfg.time_settings(), cfg.output.area_weighted, profiles.callback());
  write_run_files(dir, cfg, a.run, "run", &a);
  out << "scenario " << cfg.scenario.name << " (" << cfg.scenario.provenance << ")\n";
  detail::summarize(out, a.run);
  if (a.entropy_fit) out << "relative entropy decay rate " << format_number(a.entropy_fit->rate) << " (R^2 " << format_number(a.entropy_fit->r_squared) << ")\n";
  if (a.ck) out << "CK ratio " << format_number(*a.ck) << "\n";
  if (a.plateau) out << "plateau " << (a.plateau->detected ? "detected" : "not detected") << "\n";
  if (!a.fit_note.empty()) out << "fit note: " << a.fit_note << "\n";
  out << "outputs in " << dir.string() << "\n";
  return a.run.termination == Termination::Failure ? kExitFailure : kExitOk;
}

// Single pass to err_k < tolerance; fails if the run stops for any other reason.
inline int command_steady(const RunConfig& cfg, std::ostream& out) {
  const std::filesystem::path dir = cfg.output.directory;
  prepare_output_dir(dir);
  const ProfileRecorder profiles(dir, cfg.scenario, cfg.output.cadence);
  profiles.write_initial(initial_state(cfg.scenario).first);
  RunOptions opt;
  opt.on_step = profiles.callback();
  const RunResult r = run(cfg.scenario, cfg.time_settings(), opt);
  write_run_files(dir, cfg, r, "steady");
  out << "scenario " << cfg.scenario.name << " (" << cfg.scenario.provenance << ")\n";
  detail::summarize(out, r);
  out << "outputs in " << dir.string() << "\n";
  return r.termination == Termination::Steady ? kExitOk : kExitFailure;
}

inline int command_check(std::ostream& out) {
  bool ok = true;
  for (const auto& check : property_suite()) {
    const CheckResult r = check();
    ok = ok && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << format_number(std::round(r.seconds * 1000.0) / 1000.0) << " s]\n";
  }
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? kExitOk : kExitFailure;
}

// Runs each config (as `run`) into <out>/<config stem>, `jobs` at a time.
inline int command_sweep(const std::vector<std::string>& paths, const CliOverrides& cli, unsigned jobs,
                         std::ostream& out) {
  if (paths.empty()) throw ConfigError("sweep", "no config files given");
  std::string base = "sepnp-sweep";
  if (cli.out) base = *cli.out;
  else if (const char* env = std::getenv(kOutputDirEnv); env && *env) base = env;

  std::vector<RunConfig> configs;
  std::vector<std::string> names;
  for (const auto& p : paths) {
    CliOverrides one = cli;
    one.scenario = p;
    one.out.reset();
    RunConfig cfg = resolve_run_config(one);
    std::string stem = std::filesystem::path(p).stem().string();
    for (const auto& n : names)
      if (n == stem) stem += "-" + std::to_string(names.size());
    cfg.output.directory = (std::filesystem::path(base) / stem).string();
    prepare_output_dir(cfg.output.directory);
    names.push_back(stem);
    configs.push_back(std::move(cfg));
  }

  std::mutex io;
  std::vector<int> codes(configs.size(), kExitFailure);
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lock(io);
        if (next >= configs.size()) return;
        k = next++;
      }
      std::ostringstream log;
      try {
        codes[k] = command_run(configs[k], log);
      } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        codes[k] = kExitFailure;
      }
      std::lock_guard<std::mutex> lock(io);
      out << "[" << names[k] << "]\n" << log.str();
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  int worst = kExitOk;
  for (int c : codes) worst = std::max(worst, c);
  return worst;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Size-exclusion Poisson-Nernst-Planck channel solver"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CliOverrides cli;
  auto add_common = [&](CLI::App* sub, bool with_scenario) {
    if (with_scenario)
      sub->add_option("--scenario", cli.scenario, "preset name (calcium, degenerate) or config file")->capture_default_str();
    sub->add_option("--dt", cli.dt, "time step");
    sub->add_option("--cells", cli.cells, "number of cells");
    sub->add_option("--max-steps", cli.max_steps, "maximum number of time steps");
    sub->add_option("--steady-tol", cli.steady_tol, "steady-state threshold on err_k");
    sub->add_option("--newton-tol", cli.newton_tol, "Newton residual tolerance (max norm)");
    sub->add_option("--out", cli.out, std::string("output directory (default: $") + kOutputDirEnv + " or sepnp-out)");
    sub->add_option("--cadence", cli.cadence, "write every k-th step");
    sub->add_flag("--area-weighted", cli.area_weighted, "area-weighted L1 errors");
    sub->add_option("--poisson-area-weighting", cli.poisson_area_weighting, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--boundary-closure", cli.boundary_closure, "full-cell|half-cell")
        ->check(CLI::IsMember({"full-cell", "half-cell"}));
    sub->add_flag("--no-flux", cli.no_flux, "closed ends for the species");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run a scenario with decay analysis");
  add_common(run_cmd, true);
  CLI::App* steady_cmd = app.add_subcommand("steady", "run to steady state and write the steady profile");
  add_common(steady_cmd, true);
  CLI::App* check_cmd = app.add_subcommand("check", "run the property suite");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run several config files concurrently");
  std::vector<std::string> sweep_paths;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  sweep_cmd->add_option("configs", sweep_paths, "config files")->required();
  sweep_cmd->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
  add_common(sweep_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*check_cmd) return command_check(out);
    if (*sweep_cmd) return command_sweep(sweep_paths, cli, jobs, out);
    const RunConfig cfg = resolve_run_config(cli);
    if (*run_cmd) return command_run(cfg, out);
    return command_steady(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sepnp
