#pragma once

// Modular-variable entanglement criterion.
//
// Each quadrature value is split as x = N_x l_x + xbar, p = N_p l_p + pbar
// with xbar in [0, l_x), pbar in [0, l_p) and l_x l_p = 2 pi. The criterion
//
//   C_mec = Var(N_p,coll) + Var(xbar_coll / l_x) <= C_et
//
// certifies entanglement. even_parity uses xbar_tot = xbar1 + xbar2 (kept on
// [0, 2 l_x), not re-wrapped) with N_p,rel = N_p1 - N_p2; odd_parity uses
// xbar_rel = xbar1 - xbar2 with N_p,tot = N_p1 + N_p2.
//
// Distributions are interpolated by piecewise cubics through the grid
// points, and the moments of the modular and integer parts are integrated
// exactly against that interpolant, splitting at every period boundary.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "dopocat/lindblad.hpp"
#include "dopocat/quadrature.hpp"

namespace dopocat {

/// Entanglement threshold C_et.
inline constexpr double kEntanglementThreshold = 0.1565;

struct ModularScales {
  double l_x;
  double l_p;

  /// l_x = 2 pi / l_p.
  static ModularScales from_lp(double l_p);
  void validate() const;
};

enum class VariableSet { even_parity, odd_parity };

struct CriterionRecord {
  double time = 0.0;
  double l_p = 0.0;
  double var_modular = 0.0;  ///< Var(xbar_coll / l_x)
  double var_integer = 0.0;  ///< Var(N_p,coll)
  double c_mec = 0.0;

  [[nodiscard]] bool entangled() const { return c_mec <= kEntanglementThreshold; }
};

struct QualifierResult {
  double c_mec_min = 0.0;
  double argmin_time = 0.0;
  double argmin_lp = 0.0;
  /// Per-sample optimal records, in time order.
  std::vector<CriterionRecord> series;
  bool minimum_at_horizon = false;
};

struct ModularPart {
  std::int64_t integer;
  double rest;  ///< in [0, period)
};

/// value = integer * period + rest, floor convention.
ModularPart modular_decompose(double value, double period);

/// Binned distributions of the collective variables.
struct CollectiveDistributions {
  /// Bin centres of xbar_coll / l_x: [0, 2) for even_parity, (-1, 1) for odd_parity.
  Eigen::VectorXd modular_centers;
  Eigen::VectorXd modular_weights;
  /// Probability of N_p,coll = integer_offset + k at index k.
  std::int64_t integer_offset = 0;
  Eigen::VectorXd integer_weights;

  [[nodiscard]] double modular_variance() const;
  [[nodiscard]] double integer_variance() const;
};

CollectiveDistributions collective_distributions(const JointDistribution& px, const JointDistribution& pp,
                                                 const ModularScales& scales, VariableSet vars,
                                                 int bins_per_period = 200, int subcells = 4);

CriterionRecord evaluate_criterion(const JointDistribution& px, const JointDistribution& pp,
                                   const ModularScales& scales, VariableSet vars);

/// Minimum over `lp_grid`; ties go to the smaller l_p.
CriterionRecord optimize_lp(const JointDistribution& px, const JointDistribution& pp,
                            const std::vector<double>& lp_grid, VariableSet vars);

/// Inclusive arithmetic grid min, min+step, ... <= max.
std::vector<double> make_lp_grid(double min, double max, double step);
/// 2.0 to 6.0 in steps of 0.02.
std::vector<double> default_lp_grid();

/// Batched evaluator: moment tables for every l_p are built once, each
/// evaluation is then two matrix products per distribution.
class CriterionEvaluator {
 public:
  CriterionEvaluator(const QuadratureGrid& grid, std::vector<double> lp_grid, VariableSet vars);

  [[nodiscard]] const std::vector<double>& lp_grid() const { return lp_grid_; }
  [[nodiscard]] VariableSet variables() const { return vars_; }

  /// One record per l_p, in lp_grid order.
  [[nodiscard]] std::vector<CriterionRecord> evaluate_all(const JointDistribution& px,
                                                          const JointDistribution& pp) const;
  /// Minimal record; ties go to the smaller l_p.
  [[nodiscard]] CriterionRecord best(const JointDistribution& px, const JointDistribution& pp) const;

 private:
  QuadratureGrid grid_;
  std::vector<double> lp_grid_;
  VariableSet vars_;
  // Moment weights per grid point (rows) and l_p (cols).
  Eigen::MatrixXd rest1_, rest2_;  // xbar / l_x and its square
  Eigen::MatrixXd int1_, int2_;    // N_p and its square
};

/// Streams density-matrix samples through the criterion and keeps the
/// time-minimized qualifier.
class QualifierTracker {
 public:
  QualifierTracker(const QuadratureGrid& grid, std::vector<double> lp_grid, VariableSet vars);

  const CriterionRecord& add(double t, const DensityMatrix<>& rho);
  [[nodiscard]] const std::vector<CriterionRecord>& series() const { return series_; }
  [[nodiscard]] bool empty() const { return series_.empty(); }
  /// Index of the minimal C_mec sample (first one on ties).
  [[nodiscard]] std::size_t argmin() const { return argmin_; }
  /// Warns when the minimum sits at the last sample.
  [[nodiscard]] QualifierResult result() const;

 private:
  QuadratureGrid grid_;
  CriterionEvaluator evaluator_;
  std::vector<CriterionRecord> series_;
  std::size_t argmin_ = 0;
};

/// Requires snapshots in the trace.
QualifierResult qualifier_over_time(const EvolutionTrace& trace, const QuadratureGrid& grid,
                                    const std::vector<double>& lp_grid, VariableSet vars);

struct ModularUncertainty {
  double var_integer;  ///< Var(N_p)
  double var_modular;  ///< Var(xbar / l_x)
  [[nodiscard]] double sum() const { return var_integer + var_modular; }
};

/// Single-mode variances entering the additive bound sum >= C_et / 2.
ModularUncertainty modular_uncertainty(const DensityMatrix<>& rho, const ModularScales& scales,
                                       const QuadratureGrid& grid = QuadratureGrid::covering(8.0, 0.05));

/// CSV with header t,lp_opt,var_modular,var_integer,c_mec.
void write_timeseries_csv(std::ostream& os, const std::vector<CriterionRecord>& series);

}  // namespace dopocat
