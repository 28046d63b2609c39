#pragma once

// Run configuration: a small TOML subset.
//
//   # comment
//   scenario = "calcium"          # calcium | degenerate | custom
//   dt = 0.001
//   [physics]
//   lambda_sq = 1.2e-4
//   [species.Ca]                  # one table per species, in order
//   diffusivity = 0.792
//   valence = 2
//   left = 0.000813
//   right = 0.000813
//
// Values are double-quoted strings, numbers, true/false, or flat arrays of
// numbers. Tables are opened with [name] or [name.sub]; every key belongs to the
// most recent table. Unknown tables and keys are rejected.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sepnp/errors.hpp"
#include "sepnp/scenario.hpp"
#include "sepnp/solver.hpp"

namespace sepnp {

using ConfigValue = std::variant<double, bool, std::string, std::vector<double>>;

struct ConfigEntry {
  std::string key;  // full path, e.g. "species.Ca.valence"
  ConfigValue value;
  int line = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') in_string = !in_string;
    if (line[k] == '#' && !in_string) return std::string(line.substr(0, k));
  }
  return std::string(line);
}

inline bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return k.front() != '.' && k.back() != '.';
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline ConfigValue parse_value(std::string_view raw, const std::string& key, int line) {
  const std::string_view s = trim(raw);
  auto fail = [&](const std::string& what) { throw ConfigError(key, what + " (line " + std::to_string(line) + ")"); };
  if (s.empty()) fail("missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail("unterminated string");
    const std::string_view body = s.substr(1, s.size() - 2);
    if (body.find('"') != std::string_view::npos) fail("embedded quote in string");
    return std::string(body);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') fail("unterminated array");
    std::vector<double> out;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const auto item = trim(body.substr(0, comma));
      const auto v = parse_number(item);
      if (!v) fail("array items must be numbers");
      out.push_back(*v);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return out;
  }
  const auto v = parse_number(s);
  if (!v) fail("cannot parse value '" + std::string(s) + "'");
  return *v;
}

}  // namespace detail

inline std::vector<ConfigEntry> parse_config_entries(const std::string& text) {
  std::vector<ConfigEntry> entries;
  std::string table;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string cleaned = detail::strip_comment(raw);
    const std::string_view line = detail::trim(cleaned);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "malformed table header on line " + std::to_string(line_no));
      const std::string_view name = detail::trim(line.substr(1, line.size() - 2));
      if (!detail::valid_key(name)) throw ConfigError(std::string(name), "invalid table name");
      table = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("", "expected key = value on line " + std::to_string(line_no));
    const std::string_view key = detail::trim(line.substr(0, eq));
    if (!detail::valid_key(key)) throw ConfigError(std::string(key), "invalid key");
    const std::string path = table.empty() ? std::string(key) : table + "." + std::string(key);
    for (const auto& e : entries)
      if (e.key == path) throw ConfigError(path, "duplicate key");
    entries.push_back({path, detail::parse_value(line.substr(eq + 1), path, line_no), line_no});
  }
  return entries;
}

struct OutputSettings {
  std::string directory = "sepnp-out";
  bool directory_given = false;  // set by an explicit output.dir entry
  std::size_t cadence = 100;  // profile snapshot interval
  bool area_weighted = false;
};

struct RunConfig {
  Preset preset = Preset::Calcium;
  ScenarioOverrides overrides;
  ScenarioConfig scenario;  // resolved
  std::size_t max_steps = 1000000;
  int newton_max_iterations = 50;
  OutputSettings output;

  TimeLoopSettings time_settings() const {
    TimeLoopSettings t = TimeLoopSettings::from(scenario);
    t.max_steps = max_steps;
    t.newton.max_iterations = newton_max_iterations;
    return t;
  }

  static RunConfig from_preset(Preset p) {
    RunConfig cfg;
    cfg.preset = p;
    cfg.resolve();
    return cfg;
  }

  // Re-resolves the scenario after overrides changed.
  void resolve() {
    scenario = build_scenario(preset, overrides);
    if (max_steps < 1) throw ConfigError("max_steps", "must be at least 1");
    if (newton_max_iterations < 1) throw ConfigError("newton.max_iterations", "must be at least 1");
    if (output.cadence < 1) throw ConfigError("output.cadence", "must be at least 1");
    if (output.directory.empty()) throw ConfigError("output.dir", "must not be empty");
  }
};

namespace detail {

template <class T>
const T& expect(const ConfigEntry& e, const char* type_name) {
  if (const T* v = std::get_if<T>(&e.value)) return *v;
  throw ConfigError(e.key, std::string("expected ") + type_name);
}

inline double expect_number(const ConfigEntry& e) { return expect<double>(e, "a number"); }

inline double expect_positive(const ConfigEntry& e) {
  const double v = expect_number(e);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(e.key, "must be positive");
  return v;
}

inline std::size_t expect_count(const ConfigEntry& e, std::size_t minimum) {
  const double v = expect_number(e);
  if (!(v >= static_cast<double>(minimum)) || v != std::floor(v) || v > 1e15)
    throw ConfigError(e.key, "must be an integer >= " + std::to_string(minimum));
  return static_cast<std::size_t>(v);
}

inline double expect_finite(const ConfigEntry& e) {
  const double v = expect_number(e);
  if (!std::isfinite(v)) throw ConfigError(e.key, "must be finite");
  return v;
}

}  // namespace detail

inline RunConfig config_from_entries(const std::vector<ConfigEntry>& entries) {
  using namespace detail;
  RunConfig cfg;
  struct SpeciesDraft {
    std::string name;
    std::optional<double> diffusivity, valence, left, right;
  };
  std::vector<SpeciesDraft> species;
  auto species_slot = [&](const std::string& name) -> SpeciesDraft& {
    for (auto& s : species)
      if (s.name == name) return s;
    species.push_back({name, {}, {}, {}, {}});
    return species.back();
  };

  for (const auto& e : entries) {
    const std::string& k = e.key;
    if (k == "scenario") {
      const auto& name = expect<std::string>(e, "a string");
      const auto p = preset_from_string(name);
      if (!p) throw ConfigError(k, "unknown scenario '" + name + "'");
      cfg.preset = *p;
    } else if (k == "name") {
      cfg.overrides.name = expect<std::string>(e, "a string");
    } else if (k == "dt") {
      cfg.overrides.dt = expect_positive(e);
    } else if (k == "cells") {
      cfg.overrides.n_cells = expect_count(e, 2);
    } else if (k == "max_steps") {
      cfg.max_steps = expect_count(e, 1);
    } else if (k == "steady_tol") {
      cfg.overrides.steady_tolerance = expect_positive(e);
    } else if (k == "provenance") {
      cfg.overrides.provenance = expect<std::string>(e, "a string");
    } else if (k == "physics.beta") {
      cfg.overrides.beta = expect_positive(e);
    } else if (k == "physics.lambda_sq") {
      cfg.overrides.lambda_sq = expect_positive(e);
    } else if (k == "newton.tol") {
      cfg.overrides.newton_tolerance = expect_positive(e);
    } else if (k == "newton.max_iterations") {
      cfg.newton_max_iterations = static_cast<int>(expect_count(e, 1));
    } else if (k == "geometry.area") {
      const auto& v = expect<std::string>(e, "a string");
      if (v == "channel") cfg.overrides.area_profile = AreaProfile::Channel;
      else if (v == "uniform") cfg.overrides.area_profile = AreaProfile::Uniform;
      else throw ConfigError(k, "expected \"channel\" or \"uniform\"");
    } else if (k == "geometry.oxygen") {
      const auto& v = expect<std::string>(e, "a string");
      if (v == "none") cfg.overrides.oxygen = OxygenVariant::None;
      else if (v == "standard") cfg.overrides.oxygen = OxygenVariant::Standard;
      else if (v == "degenerate") cfg.overrides.oxygen = OxygenVariant::Degenerate;
      else throw ConfigError(k, "expected \"none\", \"standard\" or \"degenerate\"");
    } else if (k == "boundary.mode") {
      const auto& v = expect<std::string>(e, "a string");
      if (v == "dirichlet") cfg.overrides.boundary_mode = BoundaryMode::Dirichlet;
      else if (v == "no-flux") cfg.overrides.boundary_mode = BoundaryMode::NoFlux;
      else throw ConfigError(k, "expected \"dirichlet\" or \"no-flux\"");
    } else if (k == "boundary.phi_left") {
      cfg.overrides.phi_left = expect_finite(e);
    } else if (k == "boundary.phi_right") {
      cfg.overrides.phi_right = expect_finite(e);
    } else if (k == "discretization.boundary_closure") {
      const auto& v = expect<std::string>(e, "a string");
      if (v == "full-cell") cfg.overrides.closure = BoundaryClosure::FullCell;
      else if (v == "half-cell") cfg.overrides.closure = BoundaryClosure::HalfCell;
      else throw ConfigError(k, "expected \"full-cell\" or \"half-cell\"");
    } else if (k == "discretization.poisson_area_weighting") {
      cfg.overrides.poisson_area_weighting = expect<bool>(e, "true or false");
    } else if (k == "output.dir") {
      cfg.output.directory = expect<std::string>(e, "a string");
      cfg.output.directory_given = true;
    } else if (k == "output.cadence") {
      cfg.output.cadence = expect_count(e, 1);
    } else if (k == "output.area_weighted") {
      cfg.output.area_weighted = expect<bool>(e, "true or false");
    } else if (k == "units.concentration_scale") {
      cfg.overrides.concentration_scale = expect_positive(e);
    } else if (k == "units.thermal_voltage_mV") {
      cfg.overrides.thermal_voltage_mV = expect_positive(e);
    } else if (k.rfind("species.", 0) == 0) {
      const std::string rest = k.substr(8);
      const auto dot = rest.rfind('.');
      if (dot == std::string::npos || dot == 0) throw ConfigError(k, "unknown key");
      SpeciesDraft& s = species_slot(rest.substr(0, dot));
      const std::string field = rest.substr(dot + 1);
      if (field == "diffusivity") s.diffusivity = expect_positive(e);
      else if (field == "valence") s.valence = expect_finite(e);
      else if (field == "left") s.left = expect_positive(e);
      else if (field == "right") s.right = expect_positive(e);
      else throw ConfigError(k, "unknown key");
    } else {
      throw ConfigError(k, "unknown key");
    }
  }

  bool have_scenario = false;
  for (const auto& e : entries) have_scenario = have_scenario || e.key == "scenario";
  if (!have_scenario) throw ConfigError("scenario", "missing (calcium, degenerate or custom)");

  if (!species.empty()) {
    std::vector<SpeciesSpec> list;
    std::vector<double> left, right;
    for (const auto& s : species) {
      const std::string base = "species." + s.name;
      if (!s.diffusivity) throw ConfigError(base + ".diffusivity", "missing");
      if (!s.valence) throw ConfigError(base + ".valence", "missing");
      if (!s.left) throw ConfigError(base + ".left", "missing");
      if (!s.right) throw ConfigError(base + ".right", "missing");
      list.push_back({s.name, *s.diffusivity, *s.valence, {}});
      left.push_back(*s.left);
      right.push_back(*s.right);
    }
    cfg.overrides.species = std::move(list);
    cfg.overrides.u_left = std::move(left);
    cfg.overrides.u_right = std::move(right);
  }
  cfg.resolve();
  return cfg;
}

inline RunConfig parse_config(const std::string& text) { return config_from_entries(parse_config_entries(text)); }

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

// Writes the fully resolved configuration; parsing the result reproduces it.
inline std::string serialize_config(const RunConfig& cfg) {
  const ScenarioConfig& s = cfg.scenario;
  std::ostringstream os;
  auto str = [](const std::string& v) { return "\"" + v + "\""; };
  os << "scenario = " << str(to_string(cfg.preset)) << "\n";
  os << "name = " << str(s.name) << "\n";
  os << "provenance = " << str(s.provenance) << "\n";
  os << "dt = " << format_number(s.dt) << "\n";
  os << "cells = " << s.n_cells << "\n";
  os << "max_steps = " << cfg.max_steps << "\n";
  os << "steady_tol = " << format_number(s.steady_tolerance) << "\n";
  os << "\n[physics]\n";
  os << "beta = " << format_number(s.params.beta) << "\n";
  os << "lambda_sq = " << format_number(s.params.lambda_sq) << "\n";
  os << "\n[geometry]\n";
  os << "area = " << str(s.area_profile == AreaProfile::Channel ? "channel" : "uniform") << "\n";
  os << "oxygen = " << str(to_string(s.oxygen)) << "\n";
  os << "\n[boundary]\n";
  os << "mode = " << str(s.boundary.mode == BoundaryMode::Dirichlet ? "dirichlet" : "no-flux") << "\n";
  os << "phi_left = " << format_number(s.boundary.phi_left) << "\n";
  os << "phi_right = " << format_number(s.boundary.phi_right) << "\n";
  os << "\n[discretization]\n";
  os << "boundary_closure = " << str(to_string(s.discretization.closure)) << "\n";
  os << "poisson_area_weighting = " << (s.discretization.poisson_area_weighting ? "true" : "false") << "\n";
  os << "\n[newton]\n";
  os << "tol = " << format_number(s.newton_tolerance) << "\n";
  os << "max_iterations = " << cfg.newton_max_iterations << "\n";
  os << "\n[output]\n";
  os << "dir = " << str(cfg.output.directory) << "\n";
  os << "cadence = " << cfg.output.cadence << "\n";
  os << "area_weighted = " << (cfg.output.area_weighted ? "true" : "false") << "\n";
  os << "\n[units]\n";
  os << "concentration_scale = " << format_number(s.concentration_scale) << "\n";
  os << "thermal_voltage_mV = " << format_number(s.thermal_voltage_mV) << "\n";
  for (std::size_t i = 0; i < s.species.size(); ++i) {
    os << "\n[species." << s.species[i].name << "]\n";
    os << "diffusivity = " << format_number(s.species[i].diffusivity) << "\n";
    os << "valence = " << format_number(s.species[i].valence) << "\n";
    os << "left = " << format_number(s.boundary.u_left[i]) << "\n";
    os << "right = " << format_number(s.boundary.u_right[i]) << "\n";
  }
  return os.str();
}

}  // namespace sepnp
