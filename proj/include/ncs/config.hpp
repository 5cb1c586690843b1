#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncs/analysis.hpp"
#include "ncs/robot.hpp"
#include "ncs/sdp.hpp"
#include "ncs/sim.hpp"

// JSON config with a single authoritative key table: the same table drives
// strict validation (unknown keys are rejected, diagnostics name the dotted
// key) and the --help documentation of every default.

namespace ncs {

using json = nlohmann::ordered_json;

struct ToolkitConfig {
  RobotParams robot;
  BiasForm bias_form = BiasForm::paper;
  double domain_pos_halfwidth = 0.5;
  double domain_vel_halfwidth = 0.5;
  SolverConfig solver;
  NetworkScenario network;

  double analysis_T = 5e-4;
  double t_lo = 1e-4;
  double t_hi = 5e-3;
  double tolerance = 1e-5;
  std::string mk_source = "fixture";
  std::string fixture_dir = "data/fixtures";
  std::size_t estimate_samples = 20000;
  std::size_t audit_samples = 2000;
  CouplingVariant coupling = CouplingVariant::w_transpose;

  double sim_dt = 1e-5;
  std::size_t store_stride = 100;
  std::array<double, 4> initial_offset{0.3, 0.0, 0.3, 0.0};
  std::string output_dir = "out";

  json echo;  // fully resolved values, schema order

  StateDomain domain() const {
    return StateDomain::centered(robot, domain_pos_halfwidth, domain_vel_halfwidth);
  }
};

namespace cfgdetail {

enum class KeyType { number, integer, string, array4 };

struct KeySpec {
  const char* path;
  KeyType type;
  bool required;
  const char* def;  // JSON literal; ignored when required
  const char* desc;
};

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> keys = {
      {"robot.m1", KeyType::number, true, "", "link 1 mass [kg]"},
      {"robot.m2", KeyType::number, true, "", "link 2 mass [kg]"},
      {"robot.a1", KeyType::number, true, "", "link 1 length [m]"},
      {"robot.a2", KeyType::number, true, "", "link 2 length [m]"},
      {"robot.g", KeyType::number, true, "", "gravitational acceleration [m/s^2]"},
      {"robot.alpha1", KeyType::number, true, "", "joint 1 velocity gain"},
      {"robot.alpha2", KeyType::number, true, "", "joint 2 velocity gain"},
      {"robot.beta1", KeyType::number, true, "", "joint 1 position gain"},
      {"robot.beta2", KeyType::number, true, "", "joint 2 position gain"},
      {"robot.qd1", KeyType::number, false, "0.0", "joint 1 setpoint [rad]"},
      {"robot.qd2", KeyType::number, false, "0.0", "joint 2 setpoint [rad]"},
      {"robot.n2_form", KeyType::string, false, "\"paper\"",
       "N2 velocity term form: paper | coriolis"},
      {"domain.position_halfwidth", KeyType::number, false, "0.5",
       "position box halfwidth around the setpoints [rad]"},
      {"domain.velocity_halfwidth", KeyType::number, false, "0.5",
       "velocity box halfwidth [rad/s]"},
      {"solver.max_iterations", KeyType::integer, false, "20000",
       "total Newton iteration budget"},
      {"solver.margin_tolerance", KeyType::number, false, "1e-7",
       "margin below which a verdict is inconclusive"},
      {"solver.variable_bound", KeyType::number, false, "1e6",
       "box bound on every scalar variable"},
      {"solver.seed", KeyType::integer, false, "42", "solver restart seed"},
      {"solver.restarts", KeyType::integer, false, "8", "max jittered restarts"},
      {"network.control_cycle", KeyType::number, false, "5e-4", "poll period T [s]"},
      {"network.sampling_bound", KeyType::number, false, "5e-4",
       "hard bound h on consecutive polls [s] (h >= T)"},
      {"network.transport_delay_max", KeyType::number, false, "2e-4",
       "bound on summed per-packet network latency [s]"},
      {"network.loss_budget", KeyType::integer, false, "1",
       "max polls a held value may span"},
      {"network.loss_probability", KeyType::number, false, "0.0",
       "per-channel packet loss probability"},
      {"network.horizon", KeyType::number, false, "20.0", "simulation horizon [s]"},
      {"network.seed", KeyType::integer, false, "42", "delay realization seed"},
      {"analysis.T", KeyType::number, false, "5e-4",
       "cycle bound for analyze/export; channel caps are 2T"},
      {"analysis.t_lo", KeyType::number, false, "1e-4", "bound search bracket start [s]"},
      {"analysis.t_hi", KeyType::number, false, "5e-3", "bound search bracket end [s]"},
      {"analysis.tolerance", KeyType::number, false, "1e-5",
       "bound search bisection width [s]"},
      {"analysis.mk_source", KeyType::string, false, "\"fixture\"",
       "bound matrices source: fixture | estimate"},
      {"analysis.fixture_dir", KeyType::string, false, "\"data/fixtures\"",
       "directory with F/W/S/M* fixture files"},
      {"analysis.estimate_samples", KeyType::integer, false, "20000",
       "random samples per estimated gain entry"},
      {"analysis.audit_samples", KeyType::integer, false, "2000",
       "random samples for the assumption audit"},
      {"analysis.coupling", KeyType::string, false, "\"w_transpose\"",
       "coupling row variant: w_transpose | w_plain"},
      {"sim.dt", KeyType::number, false, "1e-5", "integration step [s]"},
      {"sim.store_stride", KeyType::integer, false, "100",
       "store every k-th integration step"},
      {"sim.initial_offset", KeyType::array4, false, "[0.3,0.0,0.3,0.0]",
       "initial state offset from the equilibrium"},
      {"output_dir", KeyType::string, false, "\"out\"", "artifact directory"},
  };
  return keys;
}

inline std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : dotted) {
    if (ch == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

inline const json* find_path(const json& doc, const std::string& dotted) {
  const json* cur = &doc;
  for (const auto& part : split_path(dotted)) {
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
  }
  return cur;
}

inline void collect_leaves(const json& node, const std::string& prefix,
                           std::vector<std::string>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items())
      collect_leaves(value, prefix.empty() ? key : prefix + "." + key, out);
  } else {
    out.push_back(prefix);
  }
}

inline double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw InputError("config key " + key + " must be a number");
  return v.get<double>();
}

inline std::int64_t as_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw InputError("config key " + key + " must be an integer");
  return v.get<std::int64_t>();
}

inline std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw InputError("config key " + key + " must be a string");
  return v.get<std::string>();
}

inline std::array<double, 4> as_array4(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 4)
    throw InputError("config key " + key + " must be an array of 4 numbers");
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = as_number(v[i], key);
  return out;
}

}  // namespace cfgdetail

// One override of the form key.path=value; the value is parsed as JSON with a
// bare-string fallback.
inline void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InputError("override must look like key.path=value: " + spec);
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* cur = &doc;
  const auto parts = cfgdetail::split_path(key);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!cur->contains(parts[i]) || !(*cur)[parts[i]].is_object())
      (*cur)[parts[i]] = json::object();
    cur = &(*cur)[parts[i]];
  }
  (*cur)[parts.back()] = value;
}

// Validate a parsed document against the key table and resolve defaults.
inline ToolkitConfig resolve_config(const json& doc) {
  using namespace cfgdetail;

  std::vector<std::string> leaves;
  collect_leaves(doc, "", leaves);
  for (const auto& leaf : leaves) {
    bool known = false;
    for (const auto& spec : key_table())
      if (leaf == spec.path) known = true;
    if (!known) throw InputError("unknown config key: " + leaf);
  }

  json resolved = json::object();
  auto set_path = [&](const std::string& dotted, json value) {
    json* cur = &resolved;
    const auto parts = split_path(dotted);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!cur->contains(parts[i])) (*cur)[parts[i]] = json::object();
      cur = &(*cur)[parts[i]];
    }
    (*cur)[parts.back()] = std::move(value);
  };

  for (const auto& spec : key_table()) {
    const json* v = find_path(doc, spec.path);
    if (!v) {
      if (spec.required)
        throw InputError("missing required config key: " + std::string(spec.path));
      set_path(spec.path, json::parse(spec.def));
    } else {
      // Type check now; value range checks follow below.
      switch (spec.type) {
        case KeyType::number: as_number(*v, spec.path); break;
        case KeyType::integer: as_integer(*v, spec.path); break;
        case KeyType::string: as_string(*v, spec.path); break;
        case KeyType::array4: as_array4(*v, spec.path); break;
      }
      set_path(spec.path, *v);
    }
  }

  auto num = [&](const char* p) { return as_number(*find_path(resolved, p), p); };
  auto integer = [&](const char* p) { return as_integer(*find_path(resolved, p), p); };
  auto str = [&](const char* p) { return as_string(*find_path(resolved, p), p); };
  auto positive = [&](const char* p) {
    double v = num(p);
    if (!(v > 0.0)) throw InputError("config key " + std::string(p) + " must be positive");
    return v;
  };
  auto nonneg_int = [&](const char* p) {
    auto v = integer(p);
    if (v < 0) throw InputError("config key " + std::string(p) + " must be nonnegative");
    return static_cast<std::uint64_t>(v);
  };
  auto positive_int = [&](const char* p) {
    auto v = integer(p);
    if (v < 1) throw InputError("config key " + std::string(p) + " must be at least 1");
    return static_cast<std::size_t>(v);
  };

  ToolkitConfig c;
  c.robot.m1 = positive("robot.m1");
  c.robot.m2 = positive("robot.m2");
  c.robot.a1 = positive("robot.a1");
  c.robot.a2 = positive("robot.a2");
  c.robot.g = num("robot.g");
  if (c.robot.g < 0.0) throw InputError("config key robot.g must be nonnegative");
  c.robot.alpha1 = positive("robot.alpha1");
  c.robot.alpha2 = positive("robot.alpha2");
  c.robot.beta1 = positive("robot.beta1");
  c.robot.beta2 = positive("robot.beta2");
  c.robot.qd1 = num("robot.qd1");
  c.robot.qd2 = num("robot.qd2");

  {
    const std::string form = str("robot.n2_form");
    if (form == "paper")
      c.bias_form = BiasForm::paper;
    else if (form == "coriolis")
      c.bias_form = BiasForm::coriolis;
    else
      throw InputError("config key robot.n2_form must be paper or coriolis");
  }

  c.domain_pos_halfwidth = positive("domain.position_halfwidth");
  c.domain_vel_halfwidth = positive("domain.velocity_halfwidth");

  c.solver.max_iterations = positive_int("solver.max_iterations");
  c.solver.margin_tolerance = positive("solver.margin_tolerance");
  c.solver.variable_bound = positive("solver.variable_bound");
  c.solver.seed = nonneg_int("solver.seed");
  c.solver.restarts = positive_int("solver.restarts");

  c.network.control_cycle = positive("network.control_cycle");
  c.network.sampling_bound = positive("network.sampling_bound");
  if (c.network.sampling_bound < c.network.control_cycle)
    throw InputError("config key network.sampling_bound must be >= network.control_cycle");
  c.network.transport_delay_max = num("network.transport_delay_max");
  if (c.network.transport_delay_max < 0.0)
    throw InputError("config key network.transport_delay_max must be nonnegative");
  c.network.loss_budget = positive_int("network.loss_budget");
  c.network.loss_probability = num("network.loss_probability");
  if (c.network.loss_probability < 0.0 || c.network.loss_probability > 1.0)
    throw InputError("config key network.loss_probability must lie in [0, 1]");
  c.network.horizon = positive("network.horizon");
  c.network.seed = nonneg_int("network.seed");

  c.analysis_T = num("analysis.T");
  if (c.analysis_T < 0.0) throw InputError("config key analysis.T must be nonnegative");
  c.t_lo = positive("analysis.t_lo");
  c.t_hi = positive("analysis.t_hi");
  if (c.t_hi <= c.t_lo)
    throw InputError("config key analysis.t_hi must exceed analysis.t_lo");
  c.tolerance = positive("analysis.tolerance");
  c.mk_source = str("analysis.mk_source");
  if (c.mk_source != "fixture" && c.mk_source != "estimate")
    throw InputError("config key analysis.mk_source must be fixture or estimate");
  c.fixture_dir = str("analysis.fixture_dir");
  c.estimate_samples = positive_int("analysis.estimate_samples");
  c.audit_samples = positive_int("analysis.audit_samples");
  {
    const std::string v = str("analysis.coupling");
    if (v == "w_transpose")
      c.coupling = CouplingVariant::w_transpose;
    else if (v == "w_plain")
      c.coupling = CouplingVariant::w_plain;
    else
      throw InputError("config key analysis.coupling must be w_transpose or w_plain");
  }

  c.sim_dt = positive("sim.dt");
  c.store_stride = positive_int("sim.store_stride");
  c.initial_offset = as_array4(*find_path(resolved, "sim.initial_offset"), "sim.initial_offset");
  c.output_dir = str("output_dir");

  c.echo = std::move(resolved);
  return c;
}

inline ToolkitConfig load_config(const std::string& path,
                                 const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw InputError("config root must be a JSON object");
  for (const auto& ov : overrides) apply_override(doc, ov);
  return resolve_config(doc);
}

// Rendered key table for --help.
inline std::string config_help() {
  std::ostringstream os;
  os << "Config keys (JSON, dotted paths):\n";
  for (const auto& spec : cfgdetail::key_table()) {
    os << "  " << spec.path;
    if (spec.required)
      os << " (required)";
    else
      os << " (default " << spec.def << ")";
    os << "\n      " << spec.desc << "\n";
  }
  return os.str();
}

}  // namespace ncs
