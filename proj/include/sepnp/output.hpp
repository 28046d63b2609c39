#pragma once

// Result files. Every file is written to a temporary name in the target
// directory and renamed into place, so a reader never sees a half-written CSV.
//
//   series.csv          one row per accepted step
//   profile_<k>.csv     cell profiles at step k (k = 0 and every cadence-th step)
//   steady_profile.csv  cell profile of the terminal state
//   analysis.csv        decay fits, CK ratio, plateau report (two-column table)
//   run_meta.json       resolved config, provenance, constants, version, outcome

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sepnp/config.hpp"
#include "sepnp/diagnostics.hpp"
#include "sepnp/discretization.hpp"
#include "sepnp/errors.hpp"
#include "sepnp/scenario.hpp"
#include "sepnp/solver.hpp"
#include "sepnp/version.hpp"

namespace sepnp {

namespace fs = std::filesystem;

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
}

inline void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string(), "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError(tmp.string(), "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(path.string(), "cannot move into place");
  }
}

// ---------------------------------------------------------------------------
// series.csv

inline std::vector<std::string> series_header(const ScenarioConfig& sc) {
  std::vector<std::string> h = {"step", "time", "dt", "newton_iterations", "err", "free_energy", "relative_entropy"};
  for (const auto& s : sc.species) h.push_back("l1_" + s.name);
  h.push_back("l1_phi");
  for (const auto& s : sc.species) h.push_back("mass_" + s.name);
  h.push_back("min_solvent");
  h.push_back("min_solvent_channel");
  return h;
}

inline std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += ',';
    out += cells[k];
  }
  out += '\n';
  return out;
}

inline std::string series_row(const StepReport& r, std::size_t species) {
  std::vector<std::string> c = {std::to_string(r.step), format_number(r.time), format_number(r.dt),
                                std::to_string(r.newton_iterations), format_number(r.err),
                                format_number(r.free_energy), format_number(r.relative_entropy)};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i <= species; ++i) c.push_back(format_number(i < r.l1_error.size() ? r.l1_error[i] : nan));
  for (std::size_t i = 0; i < species; ++i) c.push_back(format_number(i < r.mass.size() ? r.mass[i] : nan));
  c.push_back(format_number(r.min_solvent));
  c.push_back(format_number(r.min_solvent_channel));
  return join_csv(c);
}

inline bool reported_step(std::size_t k, std::size_t cadence) { return cadence > 0 && k % cadence == 0; }

inline std::string series_csv(const ScenarioConfig& sc, const std::vector<StepReport>& reports) {
  std::string out = join_csv(series_header(sc));
  for (const auto& r : reports) out += series_row(r, sc.species.size());
  return out;
}

// ---------------------------------------------------------------------------
// profiles

inline std::vector<std::string> profile_header(const ScenarioConfig& sc) {
  std::vector<std::string> h = {"x", "area"};
  for (const auto& s : sc.species) {
    h.push_back(s.name);
    h.push_back(s.name + "_mol_l");
  }
  h.insert(h.end(), {"u0", "u0_mol_l", "uO", "phi", "phi_mV"});
  return h;
}

inline std::string profile_csv(const UnknownVector& U, const ScenarioConfig& sc) {
  const DiscreteModel model = DiscreteModel::from(sc);
  model.check(U);
  std::string out = join_csv(profile_header(sc));
  const double scale = sc.concentration_scale;
  for (std::size_t m = 0; m < model.cells; ++m) {
    std::vector<std::string> c = {format_number((static_cast<double>(m) + 0.5) * model.h),
                                  format_number(model.cell_area[m])};
    for (std::size_t i = 0; i < model.species; ++i) {
      c.push_back(format_number(U.u(m, i)));
      c.push_back(format_number(U.u(m, i) * scale));
    }
    const double u0 = model.solvent(U, m);
    c.push_back(format_number(u0));
    c.push_back(format_number(u0 * scale));
    c.push_back(format_number(model.oxygen[m]));
    c.push_back(format_number(U.phi(m)));
    c.push_back(format_number(sc.potential_to_mV(U.phi(m))));
    out += join_csv(c);
  }
  return out;
}

inline std::string profile_filename(std::size_t step) { return "profile_" + std::to_string(step) + ".csv"; }

// ---------------------------------------------------------------------------
// analysis.csv

inline std::string analysis_csv(const RunAnalysis& a) {
  std::ostringstream os;
  os << "quantity,value\n";
  auto put = [&](const char* key, const std::string& v) { os << key << ',' << v << '\n'; };
  auto num = [&](const char* key, double v) { put(key, format_number(v)); };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  put("termination", to_string(a.run.termination));
  put("steps", std::to_string(a.run.reports.size()));
  put("steady_reached", a.steady_reached ? "true" : "false");
  put("reference_degenerate", a.reference_degenerate ? "true" : "false");
  auto fit = [&](const char* prefix, const std::optional<DecayFit>& f) {
    const std::string p(prefix);
    num((p + "_rate").c_str(), f ? f->rate : nan);
    num((p + "_rate_per_step").c_str(), f ? f->rate_per_step : nan);
    num((p + "_r_squared").c_str(), f ? f->r_squared : nan);
    num((p + "_window_begin").c_str(), f ? static_cast<double>(f->window.begin) : nan);
    num((p + "_window_end").c_str(), f ? static_cast<double>(f->window.end) : nan);
  };
  fit("entropy", a.entropy_fit);
  fit("l1", a.l1_fit);
  num("ck_ratio", a.ck.value_or(nan));
  const bool have_plateau = a.plateau.has_value();
  put("plateau_detected", have_plateau && a.plateau->detected ? "true" : "false");
  num("plateau_rate", have_plateau ? a.plateau->plateau_rate : nan);
  num("late_rate", have_plateau ? a.plateau->late_rate : nan);
  num("plateau_begin", have_plateau ? static_cast<double>(a.plateau->plateau.begin) : nan);
  num("plateau_end", have_plateau ? static_cast<double>(a.plateau->plateau.end) : nan);
  num("late_begin", have_plateau ? static_cast<double>(a.plateau->late.begin) : nan);
  num("late_end", have_plateau ? static_cast<double>(a.plateau->late.end) : nan);
  num("plateau_min_solvent_channel", have_plateau ? plateau_min_solvent(a) : nan);
  std::string note = a.fit_note;
  for (char& c : note)
    if (c == ',' || c == '\n') c = ';';
  put("fit_note", note);
  return os.str();
}

// ---------------------------------------------------------------------------
// run_meta.json

struct RunOutcome {
  std::string command;
  Termination termination = Termination::MaxSteps;
  std::size_t steps = 0;
  double final_err = std::numeric_limits<double>::quiet_NaN();
  double final_time = 0.0;
  std::size_t dt_reductions = 0;
  std::string diagnostic;
};

inline nlohmann::ordered_json run_meta(const RunConfig& cfg, const RunOutcome& outcome) {
  const ScenarioConfig& sc = cfg.scenario;
  nlohmann::ordered_json j;
  j["code_version"] = kVersion;
  j["command"] = outcome.command;
  j["scenario"] = sc.name;
  j["preset"] = to_string(cfg.preset);
  j["provenance"] = sc.provenance;
  j["parameters_verified"] = sc.provenance != "external-unverified";
  j["constants"] = {{"beta", sc.params.beta},
                    {"lambda_sq", sc.params.lambda_sq},
                    {"concentration_scale_mol_l", sc.concentration_scale},
                    {"thermal_voltage_mV", sc.thermal_voltage_mV},
                    {"potential_mV_per_unit_phi", sc.potential_to_mV(1.0)}};
  nlohmann::ordered_json species = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < sc.species.size(); ++i)
    species.push_back({{"name", sc.species[i].name},
                       {"diffusivity", sc.species[i].diffusivity},
                       {"valence", sc.species[i].valence},
                       {"left", sc.boundary.u_left[i]},
                       {"right", sc.boundary.u_right[i]}});
  j["species"] = species;
  j["config"] = serialize_config(cfg);
  j["outcome"] = {{"termination", to_string(outcome.termination)},
                  {"steps", outcome.steps},
                  {"final_time", outcome.final_time},
                  {"final_err", std::isfinite(outcome.final_err) ? nlohmann::ordered_json(outcome.final_err)
                                                                 : nlohmann::ordered_json(nullptr)},
                  {"dt_reductions", outcome.dt_reductions},
                  {"diagnostic", outcome.diagnostic}};
  return j;
}

inline RunOutcome outcome_of(const std::string& command, const RunResult& r) {
  RunOutcome o;
  o.command = command;
  o.termination = r.termination;
  o.steps = r.reports.size();
  if (!r.reports.empty()) {
    o.final_err = r.reports.back().err;
    o.final_time = r.reports.back().time;
  }
  o.dt_reductions = r.dt_reductions;
  o.diagnostic = r.diagnostic;
  return o;
}

// ---------------------------------------------------------------------------

// Writes profile snapshots as the run proceeds; hand `callback()` to the run.
class ProfileRecorder {
 public:
  ProfileRecorder(fs::path dir, const ScenarioConfig& sc, std::size_t cadence)
      : dir_(std::move(dir)), sc_(sc), cadence_(cadence) {}

  void write_initial(const UnknownVector& U) const { write_file_atomic(dir_ / profile_filename(0), profile_csv(U, sc_)); }

  std::function<void(const StepReport&, const UnknownVector&)> callback() const {
    return [this](const StepReport& r, const UnknownVector& U) {
      if (reported_step(r.step, cadence_)) write_file_atomic(dir_ / profile_filename(r.step), profile_csv(U, sc_));
    };
  }

 private:
  fs::path dir_;
  const ScenarioConfig& sc_;
  std::size_t cadence_;
};

inline void write_run_files(const fs::path& dir, const RunConfig& cfg, const RunResult& r, const std::string& command,
                            const RunAnalysis* analysis = nullptr) {
  ensure_directory(dir);
  write_file_atomic(dir / "series.csv", series_csv(cfg.scenario, r.reports));
  write_file_atomic(dir / "steady_profile.csv", profile_csv(r.final_state, cfg.scenario));
  if (analysis) write_file_atomic(dir / "analysis.csv", analysis_csv(*analysis));
  write_file_atomic(dir / "run_meta.json", run_meta(cfg, outcome_of(command, r)).dump(2) + "\n");
}

}  // namespace sepnp
