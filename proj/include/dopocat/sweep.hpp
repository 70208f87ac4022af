#pragma once

// Single runs, two-dimensional parameter sweeps and threshold boundaries.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dopocat/analysis.hpp"
#include "dopocat/config.hpp"

namespace dopocat {

enum class PointStatus { ok, horizon_warning, numerical_failure };

std::string to_string(PointStatus status);

struct PointResult {
  ModelParams params;
  PointStatus status = PointStatus::ok;
  std::string error;
  double c_mec_min = std::numeric_limits<double>::quiet_NaN();
  double argmin_time = std::numeric_limits<double>::quiet_NaN();
  double argmin_lp = std::numeric_limits<double>::quiet_NaN();
  double purity_at_min = std::numeric_limits<double>::quiet_NaN();
  /// Fidelity of the state at the minimum to the even entangled cat.
  double fidelity_at_min = std::numeric_limits<double>::quiet_NaN();
  double dt_used = 0.0;
  bool stopped_early = false;
  std::vector<CriterionRecord> series;
  std::optional<DensityMatrix<>> state_at_min;
};

/// Coupled-mode pipeline: integrate from the vacuum, track the time- and
/// l_p-minimized criterion. Integration failures are reported in the status,
/// not thrown. Config errors are thrown.
PointResult evaluate_point(const RunConfig& config, bool keep_state = false);

struct RunArtifacts {
  std::filesystem::path summary;
  std::vector<std::filesystem::path> files;
  bool failed = false;
};

/// Runs one configuration and writes `<tag>__summary.json` plus the requested
/// outputs into config.output_dir. Coupled mode writes `<tag>__timeseries.csv`
/// (t, lp_opt, var_modular, var_integer, c_mec), `<tag>__wigner_real.csv` and
/// `<tag>__wigner_imag.csv` (state at the minimum), `<tag>__snapshot.bin`.
/// Single mode writes `<tag>__fidelity.csv` (t, fidelity, purity).
/// On integration failure the summary carries status "numerical-failure".
RunArtifacts run_single(const RunConfig& config);

struct SweepResult {
  AxisSpec axis1;
  AxisSpec axis2;
  std::vector<double> values1;
  std::vector<double> values2;
  /// Row-major over (axis1 index, axis2 index).
  std::vector<PointResult> points;

  [[nodiscard]] const PointResult& at(std::size_t i, std::size_t j) const { return points[i * values2.size() + j]; }
  /// c_mec_min as a matrix, rows axis1, cols axis2 (NaN for failed points).
  [[nodiscard]] Eigen::MatrixXd c_mec_grid() const;
  /// Points with c_mec_min <= threshold.
  [[nodiscard]] int count_below(double threshold = kEntanglementThreshold) const;
};

/// Evaluates every grid point on a worker pool. Output order and values do
/// not depend on the worker count.
SweepResult run_sweep(const SweepConfig& config);

/// Writes `<tag>__<axis1>_<axis2>.csv` (axis1, axis2, c_mec_min, status),
/// `<tag>__<axis1>_<axis2>__detail.csv` and `<tag>__<axis1>_<axis2>__boundary.csv`.
std::vector<std::filesystem::path> write_sweep_outputs(const SweepResult& result, const std::string& tag,
                                                       const std::filesystem::path& dir);

void write_points_csv(std::ostream& os, const SweepResult& result);
void write_detail_csv(std::ostream& os, const SweepResult& result);

struct BoundaryPoint {
  double x;  ///< axis1
  double y;  ///< axis2
};

using Polyline = std::vector<BoundaryPoint>;

/// Threshold contour of `values` (rows x, cols y) by linear interpolation
/// along grid edges, joined cell by cell into ordered polylines. Returns an
/// empty list (with a notice) when no edge straddles the threshold. Cells with
/// a NaN corner are skipped.
std::vector<Polyline> extract_boundary(const Eigen::MatrixXd& values, const std::vector<double>& x,
                                       const std::vector<double>& y, double threshold = kEntanglementThreshold);

/// CSV with header segment,axis1,axis2.
void write_boundary_csv(std::ostream& os, const std::vector<Polyline>& boundary);

/// For each x: the largest y with values <= threshold, interpolated to the
/// next crossing. `censored` marks columns below threshold up to the last y.
struct ProfilePoint {
  double x;
  std::optional<double> y;
  bool censored = false;
};

std::vector<ProfilePoint> boundary_profile(const Eigen::MatrixXd& values, const std::vector<double>& x,
                                           const std::vector<double>& y, double threshold = kEntanglementThreshold);

struct SqueezedSuiteResult {
  /// (S, gamma_s) sweeps, one per gamma_c value.
  std::vector<double> gamma_c_values;
  std::vector<SweepResult> pump_sweeps;
  /// (gamma_sq, gamma_s) sweep.
  SweepResult squeeze_sweep;
};

SqueezedSuiteResult run_squeezed_suite(const SqueezedSuiteConfig& config);
std::vector<std::filesystem::path> write_squeezed_outputs(const SqueezedSuiteResult& result,
                                                          const SqueezedSuiteConfig& config);

/// Binary density-matrix file: int32 n_modes, int32 cutoff, then dim*dim
/// row-major complex doubles (real, imaginary), little-endian.
void write_snapshot(const std::filesystem::path& path, const DensityMatrix<>& rho);
DensityMatrix<> read_snapshot(const std::filesystem::path& path);

}  // namespace dopocat
