#pragma once

// Joint quadrature distributions P_x(x1, x2) and P_p(p1, p2) of a two-mode
// density matrix, with x = (a + a^+)/sqrt(2) and p = (a - a^+)/(sqrt(2) i).

#include <iosfwd>
#include <memory>

#include "dopocat/types.hpp"

namespace dopocat {

/// Uniform midpoint grid on [-L, L]: cell edges at -L + k*step, sample
/// points at the cell centres. 2L/step must be an integer.
struct QuadratureGrid {
  double half_width = 8.0;
  double step = 0.05;

  /// Grid with half-width rounded up to a whole number of steps.
  static QuadratureGrid covering(double half_width, double step);
  /// Default grid for a state with coherent amplitudes up to |alpha|:
  /// L = max(8, sqrt(2)|alpha| + 6), step 0.05.
  static QuadratureGrid for_amplitude(double abs_alpha, double step = 0.05);

  void validate() const;
  [[nodiscard]] int points() const;
  [[nodiscard]] double coordinate(int i) const { return -half_width + (i + 0.5) * step; }
  [[nodiscard]] Eigen::VectorXd coordinates() const;

  friend bool operator==(const QuadratureGrid&, const QuadratureGrid&) = default;
};

enum class QuadratureKind { position, momentum };

struct JointDistribution {
  QuadratureGrid grid;
  QuadratureKind kind = QuadratureKind::position;
  /// values(i, j) is the density at (coordinate(i), coordinate(j)).
  Eigen::MatrixXd values;

  /// Midpoint-rule integral.
  [[nodiscard]] double total() const { return values.sum() * grid.step * grid.step; }
};

/// Normalized oscillator eigenfunctions psi_n(x), n < cutoff, on the grid
/// points, via the three-term recurrence on normalized functions. Rows are n.
Eigen::MatrixXd hermite_wavefunction_table(int cutoff, const QuadratureGrid& grid);

/// Read-only tables shared between evaluations with the same cutoff and grid.
struct HermiteTables {
  int cutoff;
  QuadratureGrid grid;
  Eigen::MatrixXd psi;    // cutoff x points
  Eigen::MatrixXd pairs;  // (n*cutoff + m) x points: psi_n(x) psi_m(x)
};

/// Cached, thread-safe lookup.
std::shared_ptr<const HermiteTables> hermite_tables(int cutoff, const QuadratureGrid& grid);

inline constexpr double kNegativeDensityTol = 1e-9;
inline constexpr double kNormalizationErrorTol = 1e-3;

JointDistribution joint_position_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid);
/// Uses <p|n> = (-i)^n psi_n(p).
JointDistribution joint_momentum_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid);
JointDistribution joint_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid,
                                     QuadratureKind kind);

/// Single-mode quadrature density on the grid points.
Eigen::VectorXd quadrature_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid,
                                        QuadratureKind kind);

/// Warns when the grid does not reach rms + 6 vacuum widths for either
/// quadrature of either mode. Returns false in that case.
bool check_grid_coverage(const DensityMatrix<>& rho, const QuadratureGrid& grid);

/// CSV with header coord1,coord2,value.
void write_csv(std::ostream& os, const JointDistribution& dist);

}  // namespace dopocat
