#include "dopocat/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <thread>

namespace dopocat {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_bool(const json& j, const char* key, bool& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  out = j.at(key).get<bool>();
}

void read_number(const json& j, const char* key, double& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  out = j.at(key).get<double>();
}

void read_int(const json& j, const char* key, int& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() && !(v.is_number_float() && v.get<double>() == std::floor(v.get<double>())))
    throw ConfigError(where + "." + key + ": expected an integer");
  out = static_cast<int>(v.get<double>());
}

ModelParams model_from_json(const json& j) {
  check_keys(j, {"S", "gamma_s", "gamma_d", "gamma_c", "gamma_sq", "theta_sq"}, "model");
  ModelParams p;
  read_number(j, "S", p.pump, "model");
  read_number(j, "gamma_s", p.gamma_s, "model");
  read_number(j, "gamma_d", p.gamma_d, "model");
  read_number(j, "gamma_c", p.gamma_c, "model");
  read_number(j, "gamma_sq", p.gamma_sq, "model");
  read_number(j, "theta_sq", p.theta_sq, "model");
  return p;
}

AxisSpec axis_from_json(const json& j, const std::string& where) {
  check_keys(j, {"name", "min", "max", "count"}, where);
  if (!j.contains("name")) throw ConfigError(where + ": missing 'name'");
  AxisSpec a;
  std::string name;
  read(j, "name", name, where);
  a.axis = parse_axis_name(name);
  if (!j.contains("min") || !j.contains("max") || !j.contains("count"))
    throw ConfigError(where + ": 'min', 'max' and 'count' are required");
  read_number(j, "min", a.min, where);
  read_number(j, "max", a.max, where);
  read_int(j, "count", a.count, where);
  return a;
}

json parse_scalar(const std::string& raw, int line) {
  std::string v = raw;
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.pop_back();
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.erase(v.begin());
  if (v.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("line " + std::to_string(line) + ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated array");
    json arr = json::array();
    std::stringstream items(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(items, item, ',')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      arr.push_back(parse_scalar(item, line));
    }
    return arr;
  }
  char* end = nullptr;
  const double number = std::strtod(v.c_str(), &end);
  if (end == v.c_str() + v.size()) {
    const bool integral = v.find_first_of(".eE") == std::string::npos && number == std::floor(number);
    if (integral) return static_cast<long long>(number);
    return number;
  }
  return v;
}

json& descend(json& root, const std::string& dotted, int line) {
  json* node = &root;
  std::stringstream parts(dotted);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) throw ConfigError("line " + std::to_string(line) + ": empty name in '" + dotted + "'");
    if (!node->is_object()) throw ConfigError("line " + std::to_string(line) + ": '" + dotted + "' is not a section");
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
  }
  return *node;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

// -- axes ---------------------------------------------------------------------

SweepAxis parse_axis_name(const std::string& name) {
  if (name == "S") return SweepAxis::pump;
  if (name == "gamma_s") return SweepAxis::gamma_s;
  if (name == "gamma_c") return SweepAxis::gamma_c;
  if (name == "gamma_sq") return SweepAxis::gamma_sq;
  throw ConfigError("axis name '" + name + "' not in {S, gamma_s, gamma_c, gamma_sq}");
}

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::pump: return "S";
    case SweepAxis::gamma_s: return "gamma_s";
    case SweepAxis::gamma_c: return "gamma_c";
    case SweepAxis::gamma_sq: return "gamma_sq";
  }
  return "?";
}

void set_axis(ModelParams& params, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::pump: params.pump = value; break;
    case SweepAxis::gamma_s: params.gamma_s = value; break;
    case SweepAxis::gamma_c: params.gamma_c = value; break;
    case SweepAxis::gamma_sq: params.gamma_sq = value; break;
  }
}

void AxisSpec::validate() const {
  if (count < 2) throw ConfigError("axis " + axis_name(axis) + ": count must be >= 2");
  if (!(max > min)) throw ConfigError("axis " + axis_name(axis) + ": max must exceed min");
  if (min < 0) throw ConfigError("axis " + axis_name(axis) + ": values must be >= 0");
}

std::vector<double> AxisSpec::values() const {
  validate();
  std::vector<double> v(count);
  for (int k = 0; k < count; ++k) v[k] = min + (max - min) * k / (count - 1);
  return v;
}

// -- validation ---------------------------------------------------------------

void RunConfig::validate() const {
  if (tag.empty()) throw ConfigError("tag must not be empty");
  try {
    params.validate();
    controls.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (params.gamma_d != 1.0) throw ConfigError("model.gamma_d must be 1 (rates are ratios to gamma_d)");
  if (cutoff < 2 || cutoff > 60) throw ConfigError("cutoff must be in [2, 60]");
  if (grid) {
    try {
      grid->validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (!(lp_grid.min > 0) || !(lp_grid.step > 0) || lp_grid.max < lp_grid.min)
    throw ConfigError("lp_grid: need 0 < min <= max and step > 0");
  if (early_stop.enabled && !(early_stop.rise > 0)) throw ConfigError("early_stop.rise must be positive");
  if (mode == RunMode::single && outputs.wigner) throw ConfigError("wigner sections need mode = coupled");
}

QuadratureGrid RunConfig::resolved_grid() const {
  return grid ? *grid : QuadratureGrid::for_amplitude(std::abs(params.steady_amplitude()));
}

void SweepConfig::validate() const {
  if (tag.empty()) throw ConfigError("tag must not be empty");
  axis1.validate();
  axis2.validate();
  if (axis1.axis == axis2.axis) throw ConfigError("sweep axes must differ");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (base.mode != RunMode::coupled) throw ConfigError("sweeps need mode = coupled");
  base.validate();
}

void SqueezedSuiteConfig::validate() const {
  if (tag.empty()) throw ConfigError("tag must not be empty");
  if (!(gamma_sq > 0)) throw ConfigError("gamma_sq must be positive for the squeezed suite");
  if (gamma_c_values.empty()) throw ConfigError("gamma_c_values must not be empty");
  for (double g : gamma_c_values)
    if (g < 0) throw ConfigError("gamma_c_values must be >= 0");
  if (pump_axis.axis != SweepAxis::pump || loss_axis.axis != SweepAxis::gamma_s ||
      squeeze_axis.axis != SweepAxis::gamma_sq || squeeze_loss_axis.axis != SweepAxis::gamma_s)
    throw ConfigError("squeezed suite axes must be S, gamma_s and gamma_sq");
  pump_axis.validate();
  loss_axis.validate();
  squeeze_axis.validate();
  squeeze_loss_axis.validate();
  if (!(squeeze_sweep_pump >= 0) || !(squeeze_sweep_gamma_c >= 0))
    throw ConfigError("squeeze sweep S and gamma_c must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  base.validate();
}

// -- JSON ---------------------------------------------------------------------

RunConfig run_config_from_json(const json& j) {
  check_keys(j,
             {"tag", "output_dir", "mode", "variables", "cutoff", "model", "integration", "grid", "lp_grid",
              "early_stop", "outputs"},
             "run");
  RunConfig c;
  read(j, "tag", c.tag, "run");
  if (j.contains("output_dir")) {
    std::string dir;
    read(j, "output_dir", dir, "run");
    c.output_dir = dir;
  }
  if (j.contains("mode")) {
    const auto m = j.at("mode").get<std::string>();
    if (m == "single") c.mode = RunMode::single;
    else if (m == "coupled") c.mode = RunMode::coupled;
    else throw ConfigError("run.mode must be 'single' or 'coupled'");
  }
  if (j.contains("variables")) {
    const auto v = j.at("variables").get<std::string>();
    if (v == "even") c.variables = VariableSet::even_parity;
    else if (v == "odd") c.variables = VariableSet::odd_parity;
    else throw ConfigError("run.variables must be 'even' or 'odd'");
  }
  read_int(j, "cutoff", c.cutoff, "run");
  if (j.contains("model")) c.params = model_from_json(j.at("model"));
  if (j.contains("integration")) {
    const auto& s = j.at("integration");
    check_keys(s, {"dt", "t_final", "sample_every", "auto_step"}, "integration");
    read_number(s, "dt", c.controls.dt, "integration");
    read_number(s, "t_final", c.controls.t_final, "integration");
    read_int(s, "sample_every", c.controls.sample_every, "integration");
    read_bool(s, "auto_step", c.auto_step, "integration");
  }
  if (j.contains("grid")) {
    const auto& s = j.at("grid");
    check_keys(s, {"half_width", "step"}, "grid");
    QuadratureGrid g;
    read_number(s, "half_width", g.half_width, "grid");
    read_number(s, "step", g.step, "grid");
    c.grid = g;
  }
  if (j.contains("lp_grid")) {
    const auto& s = j.at("lp_grid");
    check_keys(s, {"min", "max", "step"}, "lp_grid");
    read_number(s, "min", c.lp_grid.min, "lp_grid");
    read_number(s, "max", c.lp_grid.max, "lp_grid");
    read_number(s, "step", c.lp_grid.step, "lp_grid");
  }
  if (j.contains("early_stop")) {
    const auto& s = j.at("early_stop");
    check_keys(s, {"enabled", "rise"}, "early_stop");
    read_bool(s, "enabled", c.early_stop.enabled, "early_stop");
    read_number(s, "rise", c.early_stop.rise, "early_stop");
  }
  if (j.contains("outputs")) {
    const auto& s = j.at("outputs");
    check_keys(s, {"timeseries", "wigner", "purity", "fidelity", "snapshot"}, "outputs");
    read_bool(s, "timeseries", c.outputs.timeseries, "outputs");
    read_bool(s, "wigner", c.outputs.wigner, "outputs");
    read_bool(s, "purity", c.outputs.purity, "outputs");
    read_bool(s, "fidelity", c.outputs.fidelity, "outputs");
    read_bool(s, "snapshot", c.outputs.snapshot, "outputs");
  }
  c.validate();
  return c;
}

SweepConfig sweep_config_from_json(const json& j) {
  check_keys(j, {"tag", "output_dir", "workers", "axis1", "axis2", "base"}, "sweep");
  SweepConfig c;
  read(j, "tag", c.tag, "sweep");
  if (j.contains("output_dir")) {
    std::string dir;
    read(j, "output_dir", dir, "sweep");
    c.output_dir = dir;
  }
  read_int(j, "workers", c.workers, "sweep");
  if (!j.contains("axis1") || !j.contains("axis2")) throw ConfigError("sweep: axis1 and axis2 are required");
  c.axis1 = axis_from_json(j.at("axis1"), "axis1");
  c.axis2 = axis_from_json(j.at("axis2"), "axis2");
  c.base = run_config_from_json(j.value("base", json::object()));
  c.validate();
  return c;
}

SqueezedSuiteConfig squeezed_suite_config_from_json(const json& j) {
  check_keys(j,
             {"tag", "output_dir", "workers", "base", "gamma_sq", "gamma_c_values", "pump_axis", "loss_axis",
              "squeeze_axis", "squeeze_loss_axis", "squeeze_sweep_pump", "squeeze_sweep_gamma_c"},
             "squeezed");
  SqueezedSuiteConfig c;
  read(j, "tag", c.tag, "squeezed");
  if (j.contains("output_dir")) {
    std::string dir;
    read(j, "output_dir", dir, "squeezed");
    c.output_dir = dir;
  }
  read_int(j, "workers", c.workers, "squeezed");
  c.base = run_config_from_json(j.value("base", json::object()));
  read_number(j, "gamma_sq", c.gamma_sq, "squeezed");
  read(j, "gamma_c_values", c.gamma_c_values, "squeezed");
  if (j.contains("pump_axis")) c.pump_axis = axis_from_json(j.at("pump_axis"), "pump_axis");
  if (j.contains("loss_axis")) c.loss_axis = axis_from_json(j.at("loss_axis"), "loss_axis");
  if (j.contains("squeeze_axis")) c.squeeze_axis = axis_from_json(j.at("squeeze_axis"), "squeeze_axis");
  if (j.contains("squeeze_loss_axis"))
    c.squeeze_loss_axis = axis_from_json(j.at("squeeze_loss_axis"), "squeeze_loss_axis");
  read_number(j, "squeeze_sweep_pump", c.squeeze_sweep_pump, "squeezed");
  read_number(j, "squeeze_sweep_gamma_c", c.squeeze_sweep_gamma_c, "squeezed");
  c.validate();
  return c;
}

json to_json(const ModelParams& p) {
  return {{"S", p.pump},           {"gamma_s", p.gamma_s},   {"gamma_d", p.gamma_d},
          {"gamma_c", p.gamma_c},  {"gamma_sq", p.gamma_sq}, {"theta_sq", p.theta_sq}};
}

// -- text ---------------------------------------------------------------------

json parse_key_value_text(const std::string& text) {
  json root = json::object();
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    bool quoted = false;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (raw[k] == '"') quoted = !quoted;
      if (raw[k] == '#' && !quoted) {
        raw.resize(k);
        break;
      }
    }
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      descend(root, section, line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
    const std::string path = section.empty() ? key : section + "." + key;
    const auto dot = path.rfind('.');
    json& parent = dot == std::string::npos ? root : descend(root, path.substr(0, dot), line);
    const std::string leaf = dot == std::string::npos ? path : path.substr(dot + 1);
    if (parent.contains(leaf)) throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + path + "'");
    parent[leaf] = parse_scalar(s.substr(eq + 1), line);
  }
  return root;
}

json parse_config_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
  }
  return parse_key_value_text(text);
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

int resolve_workers(int requested) {
  if (const char* env = std::getenv("DOPOCAT_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("DOPOCAT_WORKERS must be a positive integer");
    return static_cast<int>(v);
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace dopocat
