#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sepnp/app.hpp"

using namespace sepnp;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sepnp-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string config_error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

int call(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "sepnp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

}  // namespace

TEST(ParseConfig, MinimalConfigGivesPresetDefaults) {
  const RunConfig cfg = parse_config("scenario = \"calcium\"\n");
  EXPECT_EQ(cfg.preset, Preset::Calcium);
  EXPECT_EQ(cfg.scenario.dt, 0.001);
  EXPECT_EQ(cfg.scenario.n_cells, 100u);
  EXPECT_EQ(cfg.scenario.provenance, "external-unverified");
  EXPECT_EQ(cfg.output.cadence, 100u);
  EXPECT_FALSE(cfg.output.directory_given);
}

TEST(ParseConfig, ErrorsNameTheKey) {
  EXPECT_EQ(config_error_key("scenario = \"calcium\"\ndt = -1\n"), "dt");
  EXPECT_EQ(config_error_key("scenario = \"calcium\"\nfoo = 1\n"), "foo");
  EXPECT_EQ(config_error_key("dt = 0.01\n"), "scenario");
  EXPECT_EQ(config_error_key("scenario = \"calcium\"\ncells = \"many\"\n"), "cells");
  EXPECT_EQ(config_error_key("scenario = \"calcium\"\n[physics]\nbogus = 2\n"), "physics.bogus");
  EXPECT_EQ(config_error_key("scenario = \"calcium\"\ndt = 0.1\ndt = 0.2\n"), "dt");
  EXPECT_EQ(config_error_key("scenario = \"nowhere\"\n"), "scenario");
  EXPECT_EQ(config_error_key("scenario = \"calcium\"\n[output]\ncadence = 0\n"), "output.cadence");
}

TEST(ParseConfig, CustomScenarioNeedsCompleteSpecies) {
  const std::string base =
      "scenario = \"custom\"\n[physics]\nbeta = 1\nlambda_sq = 0.1\n[species.A]\ndiffusivity = 1\nvalence = 1\nleft = 0.1\n";
  EXPECT_EQ(config_error_key(base), "species.A.right");
  const RunConfig cfg = parse_config(base + "right = 0.2\n");
  ASSERT_EQ(cfg.scenario.species.size(), 1u);
  EXPECT_EQ(cfg.scenario.boundary.u_right[0], 0.2);
  EXPECT_EQ(cfg.scenario.provenance, "user");
}

TEST(ParseConfig, CommentsTablesAndOverrides) {
  const RunConfig cfg = parse_config(
      "# comment\nscenario = \"degenerate\"   # trailing\ncells = 64\n\n[discretization]\nboundary_closure = "
      "\"half-cell\"\npoisson_area_weighting = false\n[boundary]\nmode = \"no-flux\"\n[output]\ndir = \"x/y\"\n");
  EXPECT_EQ(cfg.scenario.oxygen, OxygenVariant::Degenerate);
  EXPECT_EQ(cfg.scenario.n_cells, 64u);
  EXPECT_EQ(cfg.scenario.discretization.closure, BoundaryClosure::HalfCell);
  EXPECT_FALSE(cfg.scenario.discretization.poisson_area_weighting);
  EXPECT_EQ(cfg.scenario.boundary.mode, BoundaryMode::NoFlux);
  EXPECT_EQ(cfg.output.directory, "x/y");
  EXPECT_TRUE(cfg.output.directory_given);
}

TEST(SerializeConfig, RoundTripIsIdempotent) {
  for (const std::string& text :
       {std::string("scenario = \"calcium\"\n"), std::string("scenario = \"degenerate\"\ndt = 0.0005\ncells = 37\n"),
        read_file(fs::path(SEPNP_SOURCE_DIR) / "configs" / "uniform_two_species.toml")}) {
    const RunConfig a = parse_config(text);
    const std::string s1 = serialize_config(a);
    const RunConfig b = parse_config(s1);
    const std::string s2 = serialize_config(b);
    EXPECT_EQ(s1, s2);
    EXPECT_EQ(a.scenario.dt, b.scenario.dt);
    EXPECT_EQ(a.scenario.params.lambda_sq, b.scenario.params.lambda_sq);
    EXPECT_EQ(a.scenario.boundary.u_left, b.scenario.boundary.u_left);
  }
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1e-13), "1e-13");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(SampleConfigs, AllParse) {
  for (const auto& entry : fs::directory_iterator(fs::path(SEPNP_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() == ".toml") {
      EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    }
  }
}

TEST(Output, SeriesHeaderSchema) {
  const auto sc = build_scenario(Preset::Calcium);
  EXPECT_EQ(join_csv(series_header(sc)),
            "step,time,dt,newton_iterations,err,free_energy,relative_entropy,l1_Ca,l1_Na,l1_Cl,l1_phi,mass_Ca,mass_Na,"
            "mass_Cl,min_solvent,min_solvent_channel\n");
}

TEST(Output, ProfileCarriesScaledColumns) {
  ScenarioOverrides o;
  o.n_cells = 10;
  const auto sc = build_scenario(Preset::Calcium, o);
  const auto [U, report] = initial_state(sc);
  const std::string csv = profile_csv(U, sc);
  EXPECT_EQ(first_line(csv), "x,area,Ca,Ca_mol_l,Na,Na_mol_l,Cl,Cl_mol_l,u0,u0_mol_l,uO,phi,phi_mV");
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  EXPECT_EQ(rows, 11u);
  // Columns per row match the header.
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line)) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 12);
}

TEST(Output, AtomicWriteLeavesNoTemporary) {
  const fs::path dir = scratch("atomic");
  ensure_directory(dir);
  write_file_atomic(dir / "a.csv", "x\n1\n");
  write_file_atomic(dir / "a.csv", "x\n2\n");
  EXPECT_EQ(read_file(dir / "a.csv"), "x\n2\n");
  EXPECT_FALSE(fs::exists(dir / "a.csv.tmp"));
  EXPECT_THROW(write_file_atomic(dir / "missing" / "b.csv", "x"), IoError);
  fs::remove_all(dir);
}

TEST(Output, RunFilesAreDeterministic) {
  const fs::path base = scratch("det");
  RunConfig cfg = parse_config("scenario = \"calcium\"\ncells = 30\nmax_steps = 40\n");
  std::string series[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path dir = base / std::to_string(k);
    const RunResult r = run(cfg.scenario, cfg.time_settings());
    write_run_files(dir, cfg, r, "steady");
    series[k] = read_file(dir / "series.csv");
    EXPECT_TRUE(fs::exists(dir / "steady_profile.csv"));
    EXPECT_TRUE(fs::exists(dir / "run_meta.json"));
  }
  EXPECT_FALSE(series[0].empty());
  EXPECT_EQ(series[0], series[1]);
  const auto meta = nlohmann::json::parse(read_file(base / "0" / "run_meta.json"));
  EXPECT_EQ(meta["provenance"], "external-unverified");
  EXPECT_EQ(meta["parameters_verified"], false);
  EXPECT_EQ(meta["outcome"]["termination"], "max_steps");
  EXPECT_EQ(meta["outcome"]["steps"], 40);
  EXPECT_EQ(meta["code_version"], kVersion);
  fs::remove_all(base);
}

TEST(Cli, UnknownScenarioIsConfigError) {
  EXPECT_EQ(call({"run", "--scenario", "nonsense"}), kExitConfig);
  EXPECT_EQ(call({"steady", "--scenario", "calcium", "--dt", "-1"}), kExitConfig);
  EXPECT_EQ(call({"steady", "--scenario", "/no/such/file.toml"}), kExitConfig);
  EXPECT_EQ(call({"frobnicate"}), kExitConfig);
  EXPECT_EQ(call({}), kExitConfig);
}

TEST(Cli, SteadyCalciumReachesTolerance) {
  const fs::path dir = scratch("steady");
  std::string text;
  ASSERT_EQ(call({"steady", "--scenario", "calcium", "--out", dir.string(), "--cadence", "1000"}, &text), kExitOk)
      << text;
  const std::string series = read_file(dir / "series.csv");
  const std::string last = series.substr(series.rfind('\n', series.size() - 2) + 1);
  std::vector<std::string> cells;
  std::stringstream ss(last);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  ASSERT_GT(cells.size(), 5u);
  EXPECT_LT(std::stod(cells[4]), 1e-13);
  EXPECT_TRUE(fs::exists(dir / "profile_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "profile_1000.csv"));
  EXPECT_TRUE(fs::exists(dir / "steady_profile.csv"));
  fs::remove_all(dir);
}

TEST(Cli, MaxStepsMakesSteadyFail) {
  const fs::path dir = scratch("short");
  EXPECT_EQ(call({"steady", "--scenario", "calcium", "--cells", "20", "--max-steps", "3", "--out", dir.string()}),
            kExitFailure);
  fs::remove_all(dir);
}

TEST(Cli, RunWritesAnalysis) {
  const fs::path dir = scratch("run");
  std::string text;
  ASSERT_EQ(call({"run", "--scenario", (fs::path(SEPNP_SOURCE_DIR) / "configs" / "uniform_two_species.toml").string(),
                  "--out", dir.string()},
                 &text),
            kExitOk)
      << text;
  const std::string analysis = read_file(dir / "analysis.csv");
  EXPECT_EQ(first_line(analysis), "quantity,value");
  EXPECT_NE(analysis.find("termination,steady"), std::string::npos);
  EXPECT_NE(analysis.find("ck_ratio,"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, EnvironmentChoosesOutputDirectory) {
  const fs::path dir = scratch("env");
  ::setenv(kOutputDirEnv, dir.string().c_str(), 1);
  const RunConfig cfg = resolve_run_config(CliOverrides{});
  EXPECT_EQ(cfg.output.directory, dir.string());
  CliOverrides explicit_out;
  explicit_out.out = "elsewhere";
  EXPECT_EQ(resolve_run_config(explicit_out).output.directory, "elsewhere");
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(resolve_run_config(CliOverrides{}).output.directory, "sepnp-out");
}

TEST(Cli, CheckPasses) {
  std::string text;
  EXPECT_EQ(call({"check"}, &text), kExitOk) << text;
  EXPECT_NE(text.find("all checks passed"), std::string::npos);
}
