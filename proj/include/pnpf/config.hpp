#pragma once

/// @file config.hpp
/// Run configuration: a sectioned key = value file read with
/// Boost.PropertyTree's INI parser. Every key lives in one registry that
/// drives parsing, validation and the resolved manifest dump, so a manifest
/// always reloads to the same configuration. Unknown sections or keys are
/// errors.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pnpf/error.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/model.hpp"
#include "pnpf/nondim.hpp"

namespace pnpf {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Experiment { Accuracy, Charging, CyclicVoltammetry };
enum class Protocol { ConstantVoltage, Triangular };

struct CvSettings {
  double v_max = 2.0;
  std::vector<double> scan_rates{0.05, 0.025, 0.0125};
  int cycles = 3;
};

struct MmsSettings {
  std::vector<int> levels{8, 16, 32, 64};
  double t_end = 0.1;
};

struct RunConfig {
  Experiment experiment = Experiment::Charging;
  int scheme = 1;
  std::string output = "out";
  bool deterministic = true;

  GeometrySpec geometry = GeometrySpec::electrode_comb(64, 32);
  ModelParams model;
  double fixed_charge = 0.0;  ///< uniform background charge
  std::optional<PhysicalBlock> physical;

  Protocol protocol = Protocol::ConstantVoltage;
  double psi_star = 2.0;
  CvSettings cv;

  double dt = 0.05;
  double t_end = 30.0;
  std::vector<double> snapshots{0.0, 0.1, 1.0, 30.0};
  StepControl step;

  NewtonConfig newton;
  MmsSettings mms;

  void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    fail(Errc::ConfigError, fmt::format("{}: '{}' is not a valid number", key, s));
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) fail(Errc::ConfigError, key + ": empty list");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(Errc::ConfigError, fmt::format("{}: '{}' is not a boolean", key, s));
}

template <class T>
std::string format_list(const std::vector<T>& v) {
  return fmt::format("{}", fmt::join(v, ", "));
}

/// Maps between a textual value and its enum, both directions.
template <class E>
struct Choice {
  std::vector<std::pair<std::string, E>> options;

  E parse(const std::string& key, const std::string& text) const {
    const std::string s = trim(text);
    for (const auto& [name, value] : options)
      if (name == s) return value;
    fail(Errc::ConfigError, fmt::format("{}: unknown value '{}'", key, s));
  }
  std::string name(E e) const {
    for (const auto& [name, value] : options)
      if (value == e) return name;
    return "?";
  }
};

inline const Choice<Experiment> kExperiments{
    {{"accuracy", Experiment::Accuracy}, {"charging", Experiment::Charging}, {"cv", Experiment::CyclicVoltammetry}}};
inline const Choice<GeometryKind> kGeometries{
    {{"unit_square", GeometryKind::UnitSquare}, {"comb", GeometryKind::ElectrodeComb}}};
inline const Choice<PotentialFaces> kFaces{{{"x_dirichlet", PotentialFaces::XDirichlet},
                                            {"all_dirichlet", PotentialFaces::AllDirichlet},
                                            {"all_neumann", PotentialFaces::AllNeumann}}};
inline const Choice<Protocol> kProtocols{{{"constant", Protocol::ConstantVoltage}, {"cv", Protocol::Triangular}}};
inline const Choice<LinMethod> kLinMethods{{{"direct", LinMethod::Direct},
                                            {"cg", LinMethod::ConjugateGradient},
                                            {"bicgstab", LinMethod::BiCGSTAB}}};

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool physical = false;  ///< only dumped when the physical block is in use
};

inline std::string num(double v) { return fmt::format("{}", v); }

inline PhysicalBlock& physical(RunConfig& c) {
  if (!c.physical) c.physical.emplace();
  return *c.physical;
}

// Field helpers for plain members.
#define PNPF_DOUBLE(sec, name, expr)                                                        \
  Field {                                                                                   \
    sec, name, [](RunConfig& c, const std::string& v) { expr = parse_number<double>(name, v); }, \
        [](const RunConfig& c) { return num(expr); }                                      \
  }
#define PNPF_INT(sec, name, expr)                                                          \
  Field {                                                                                  \
    sec, name, [](RunConfig& c, const std::string& v) { expr = parse_number<int>(name, v); }, \
        [](const RunConfig& c) { return fmt::format("{}", expr); }                        \
  }
#define PNPF_PHYS(name, member)                                                                       \
  Field {                                                                                             \
    "physical", name,                                                                                 \
        [](RunConfig& c, const std::string& v) { physical(c).member = parse_number<double>(name, v); }, \
        [](const RunConfig& c) { return num(c.physical->member); }, true                            \
  }

inline const std::vector<Field>& registry() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f{
        {"run", "experiment", [](RunConfig& c, const std::string& v) { c.experiment = kExperiments.parse("experiment", v); },
         [](const RunConfig& c) { return kExperiments.name(c.experiment); }},
        PNPF_INT("run", "scheme", c.scheme),
        {"run", "output", [](RunConfig& c, const std::string& v) { c.output = trim(v); },
         [](const RunConfig& c) { return c.output; }},
        {"run", "deterministic", [](RunConfig& c, const std::string& v) { c.deterministic = parse_bool("deterministic", v); },
         [](const RunConfig& c) { return std::string(c.deterministic ? "true" : "false"); }},

        {"geometry", "kind", [](RunConfig& c, const std::string& v) { c.geometry.kind = kGeometries.parse("kind", v); },
         [](const RunConfig& c) { return kGeometries.name(c.geometry.kind); }},
        PNPF_INT("geometry", "nx", c.geometry.nx),
        PNPF_INT("geometry", "ny", c.geometry.ny),
        PNPF_DOUBLE("geometry", "x_min", c.geometry.x_min),
        PNPF_DOUBLE("geometry", "x_max", c.geometry.x_max),
        PNPF_DOUBLE("geometry", "y_min", c.geometry.y_min),
        PNPF_DOUBLE("geometry", "y_max", c.geometry.y_max),
        {"geometry", "faces", [](RunConfig& c, const std::string& v) { c.geometry.faces = kFaces.parse("faces", v); },
         [](const RunConfig& c) { return kFaces.name(c.geometry.faces); }},
        PNPF_INT("geometry", "teeth", c.geometry.comb.teeth),
        PNPF_DOUBLE("geometry", "tooth_width", c.geometry.comb.tooth_width),
        PNPF_DOUBLE("geometry", "tooth_depth", c.geometry.comb.tooth_depth),
        PNPF_DOUBLE("geometry", "gap_half_width", c.geometry.comb.gap_half_width),

        {"model", "valences", [](RunConfig& c, const std::string& v) { c.model.z = parse_list<int>("valences", v); },
         [](const RunConfig& c) { return format_list(c.model.z); }},
        {"model", "viscosities", [](RunConfig& c, const std::string& v) { c.model.nu = parse_list<double>("viscosities", v); },
         [](const RunConfig& c) { return format_list(c.model.nu); }},
        PNPF_DOUBLE("model", "eps", c.model.eps),
        PNPF_DOUBLE("model", "conductivity", c.model.k),
        PNPF_DOUBLE("model", "heat_capacity", c.model.c_t),
        PNPF_DOUBLE("model", "fixed_charge", c.fixed_charge),

        PNPF_PHYS("T0", T0),
        PNPF_PHYS("c0_molar", c0),
        PNPF_PHYS("length_m", L),
        PNPF_PHYS("eps0", eps0),
        PNPF_PHYS("eps_r", eps_r),
        PNPF_PHYS("nu0", nu0),
        {"physical", "nu", [](RunConfig& c, const std::string& v) { physical(c).nu = parse_list<double>("nu", v); },
         [](const RunConfig& c) { return format_list(c.physical->nu); }, true},
        PNPF_PHYS("conductivity", k),
        PNPF_PHYS("heat_capacity_molar", C),

        {"protocol", "kind", [](RunConfig& c, const std::string& v) { c.protocol = kProtocols.parse("kind", v); },
         [](const RunConfig& c) { return kProtocols.name(c.protocol); }},
        PNPF_DOUBLE("protocol", "psi_star", c.psi_star),
        PNPF_DOUBLE("protocol", "v_max", c.cv.v_max),
        {"protocol", "scan_rates", [](RunConfig& c, const std::string& v) { c.cv.scan_rates = parse_list<double>("scan_rates", v); },
         [](const RunConfig& c) { return format_list(c.cv.scan_rates); }},
        PNPF_INT("protocol", "cycles", c.cv.cycles),

        PNPF_DOUBLE("timestep", "dt", c.dt),
        PNPF_DOUBLE("timestep", "t_end", c.t_end),
        {"timestep", "snapshots", [](RunConfig& c, const std::string& v) { c.snapshots = parse_list<double>("snapshots", v); },
         [](const RunConfig& c) { return format_list(c.snapshots); }},
        {"timestep", "auto_halving", [](RunConfig& c, const std::string& v) { c.step.auto_halving = parse_bool("auto_halving", v); },
         [](const RunConfig& c) { return std::string(c.step.auto_halving ? "true" : "false"); }},
        PNPF_INT("timestep", "max_halvings", c.step.max_halvings),

        PNPF_DOUBLE("newton", "tol", c.newton.tol),
        PNPF_DOUBLE("newton", "step_tol", c.newton.step_tol),
        PNPF_INT("newton", "max_iterations", c.newton.max_iterations),
        PNPF_INT("newton", "max_halvings", c.newton.max_halvings),

        {"linear", "method", [](RunConfig& c, const std::string& v) { c.newton.linear.method = kLinMethods.parse("method", v); },
         [](const RunConfig& c) { return kLinMethods.name(c.newton.linear.method); }},
        PNPF_DOUBLE("linear", "tol", c.newton.linear.tol),
        PNPF_INT("linear", "max_iterations", c.newton.linear.max_iterations),

        {"mms", "levels", [](RunConfig& c, const std::string& v) { c.mms.levels = parse_list<int>("levels", v); },
         [](const RunConfig& c) { return format_list(c.mms.levels); }},
        PNPF_DOUBLE("mms", "t_end", c.mms.t_end),
    };
    return f;
  }();
  return fields;
}

#undef PNPF_DOUBLE
#undef PNPF_INT
#undef PNPF_PHYS

inline const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : registry())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

inline void assign(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  const Field* f = find_field(section, key);
  if (f == nullptr) fail(Errc::ConfigError, fmt::format("unknown key '{}.{}'", section, key));
  f->set(cfg, value);
}

}  // namespace detail

inline void RunConfig::validate() const {
  if (scheme != 1 && scheme != 2) fail(Errc::ConfigError, "scheme must be 1 or 2");
  if (!(dt > 0.0)) fail(Errc::ConfigError, "dt must be positive");
  if (!(t_end > 0.0)) fail(Errc::ConfigError, "t_end must be positive");
  if (output.empty()) fail(Errc::ConfigError, "output directory must not be empty");
  if (step.max_halvings < 0) fail(Errc::ConfigError, "max_halvings must not be negative");
  for (double s : snapshots)
    if (s < 0.0) fail(Errc::ConfigError, "snapshot times must not be negative");
  model.validate();
  newton.validate();
  if (experiment == Experiment::CyclicVoltammetry) {
    if (protocol != Protocol::Triangular) fail(Errc::ConfigError, "the cv experiment needs protocol kind = cv");
    if (!(cv.v_max > 0.0)) fail(Errc::ConfigError, "v_max must be positive");
    if (cv.cycles < 2) fail(Errc::ConfigError, "cv needs at least two cycles to fit a heating slope");
    for (double nu : cv.scan_rates)
      if (!(nu > 0.0)) fail(Errc::ConfigError, "scan rates must be positive");
  }
  if (experiment == Experiment::Charging && protocol != Protocol::ConstantVoltage)
    fail(Errc::ConfigError, "the charging experiment needs protocol kind = constant");
  if (experiment == Experiment::Accuracy) {
    if (mms.levels.size() < 3) fail(Errc::ConfigError, "accuracy runs need at least three levels");
    if (!(mms.t_end > 0.0)) fail(Errc::ConfigError, "mms t_end must be positive");
    for (int n : mms.levels)
      if (n < 2) fail(Errc::ConfigError, "mms levels must be at least 2");
  }
}

/// Applies "section.key=value".
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const std::string lhs = eq == std::string::npos ? "" : detail::trim(assignment.substr(0, eq));
  const auto dot = lhs.find('.');
  if (eq == std::string::npos || dot == std::string::npos)
    fail(Errc::ConfigError, fmt::format("override '{}' is not of the form section.key=value", assignment));
  detail::assign(cfg, lhs.substr(0, dot), lhs.substr(dot + 1), assignment.substr(eq + 1));
}

/// Parses a configuration; the physical block, when present, replaces the
/// model's eps, conductivity, heat capacity and viscosities.
inline RunConfig load_config(std::istream& in, const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(Errc::ConfigError, e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      fail(Errc::ConfigError, fmt::format("key '{}' appears outside any section", section));
    for (const auto& [key, node] : body) detail::assign(cfg, section, key, node.data());
  }
  for (const std::string& o : overrides) apply_override(cfg, o);
  if (cfg.physical) apply(nondimensionalize(*cfg.physical), cfg.model);
  cfg.validate();
  return cfg;
}

inline RunConfig load_config_string(const std::string& text, const std::vector<std::string>& overrides = {}) {
  std::istringstream in(text);
  return load_config(in, overrides);
}

/// Resolved configuration as a loadable key = value file.
inline void write_manifest(std::ostream& os, const RunConfig& cfg) {
  os << "; pnpf " << kVersion << " resolved configuration\n";
  std::string section;
  for (const detail::Field& f : detail::registry()) {
    if (f.physical && !cfg.physical) continue;
    if (f.section != section) {
      os << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    os << f.key << " = " << f.get(cfg) << '\n';
  }
}

}  // namespace pnpf
