#pragma once

// Run and sweep configuration, read from JSON or from key = value text with
// [section] headers. All rates are ratios to gamma_d, which must be 1.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopocat/lindblad.hpp"
#include "dopocat/modular.hpp"
#include "dopocat/quadrature.hpp"

namespace dopocat {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { single, coupled };

struct LpGridSpec {
  double min = 2.0;
  double max = 6.0;
  double step = 0.02;

  [[nodiscard]] std::vector<double> values() const { return make_lp_grid(min, max, step); }
};

struct OutputRequest {
  bool timeseries = true;
  bool wigner = false;
  bool purity = true;
  bool fidelity = false;
  bool snapshot = false;
};

/// Ends a run once C_mec has risen `rise` above its running minimum and is
/// above the entanglement threshold.
struct EarlyStop {
  bool enabled = false;
  double rise = 0.01;

  [[nodiscard]] bool should_stop(double c_mec, double running_min) const {
    return enabled && c_mec > running_min + rise && c_mec > kEntanglementThreshold;
  }
};

struct RunConfig {
  std::string tag = "run";
  std::filesystem::path output_dir = ".";
  RunMode mode = RunMode::coupled;
  VariableSet variables = VariableSet::even_parity;
  int cutoff = 16;
  ModelParams params;
  IntegrationControls controls;
  /// Reduce dt where the fixed step would be unstable.
  bool auto_step = true;
  /// Defaults to QuadratureGrid::for_amplitude(|steady amplitude|).
  std::optional<QuadratureGrid> grid;
  LpGridSpec lp_grid;
  EarlyStop early_stop;
  OutputRequest outputs;

  void validate() const;
  [[nodiscard]] QuadratureGrid resolved_grid() const;
};

enum class SweepAxis { pump, gamma_s, gamma_c, gamma_sq };

SweepAxis parse_axis_name(const std::string& name);
std::string axis_name(SweepAxis axis);
void set_axis(ModelParams& params, SweepAxis axis, double value);

struct AxisSpec {
  SweepAxis axis = SweepAxis::pump;
  double min = 0.0;
  double max = 1.0;
  int count = 2;

  void validate() const;
  [[nodiscard]] std::vector<double> values() const;
};

struct SweepConfig {
  std::string tag = "sweep";
  std::filesystem::path output_dir = ".";
  AxisSpec axis1;
  AxisSpec axis2;
  RunConfig base;
  /// 0 picks the hardware concurrency; DOPOCAT_WORKERS overrides.
  int workers = 0;

  void validate() const;
};

/// The squeezed-reservoir set: (S, gamma_s) sweeps at fixed gamma_sq for each
/// gamma_c, plus a (gamma_sq, gamma_s) sweep at fixed S and gamma_c.
struct SqueezedSuiteConfig {
  std::string tag = "squeezed";
  std::filesystem::path output_dir = ".";
  RunConfig base;
  double gamma_sq = 1.0;
  std::vector<double> gamma_c_values{5.0, 10.0};
  AxisSpec pump_axis{SweepAxis::pump, 0.8, 1.6, 9};
  AxisSpec loss_axis{SweepAxis::gamma_s, 0.0, 0.15, 9};
  AxisSpec squeeze_axis{SweepAxis::gamma_sq, 0.0, 1.6, 9};
  // Wider than loss_axis: squeezing pushes the boundary past gamma_s = 0.15.
  AxisSpec squeeze_loss_axis{SweepAxis::gamma_s, 0.0, 0.24, 9};
  double squeeze_sweep_pump = 1.2;
  double squeeze_sweep_gamma_c = 10.0;
  int workers = 0;

  void validate() const;
};

/// Parses `key = value` lines with optional [section] / [a.b] headers into a
/// JSON tree. Values: numbers, true/false, quoted or bare strings, and flat
/// arrays [x, y]. '#' starts a comment.
nlohmann::json parse_key_value_text(const std::string& text);

/// JSON when the first non-blank character is '{', key/value text otherwise.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config_file(const std::filesystem::path& path);

RunConfig run_config_from_json(const nlohmann::json& j);
SweepConfig sweep_config_from_json(const nlohmann::json& j);
SqueezedSuiteConfig squeezed_suite_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelParams& params);

/// Worker count after applying the DOPOCAT_WORKERS override; always >= 1.
int resolve_workers(int requested);

}  // namespace dopocat
