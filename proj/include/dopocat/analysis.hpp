#pragma once

// State diagnostics: purity, fidelity to pure targets, the single-oscillator
// cat fidelity and two-mode Wigner sections.

#include <iosfwd>
#include <vector>

#include "dopocat/lindblad.hpp"

namespace dopocat {

/// Tr(rho^2).
double purity(const DensityMatrix<>& rho);

/// <psi|rho|psi>.
double fidelity_to_pure(const DensityMatrix<>& rho, const StateVector<>& psi);

struct FidelityReport {
  std::vector<double> times;
  std::vector<double> fidelity;
  double max = 0.0;
  double argmax_time = 0.0;
};

/// Evolves one oscillator from the vacuum (gamma_c ignored) and tracks the
/// fidelity to the even cat with amplitude i sqrt(2 S / gamma_d).
FidelityReport max_cat_fidelity_single_mode(const ModelParams& params, const IntegrationControls& controls,
                                            int cutoff = 16);

/// <n|D(beta)|m> for n, m < cutoff. Exact matrix elements (no truncation
/// of the generator), from a normalized Laguerre recurrence.
Eigen::MatrixXcd displacement_matrix(std::complex<double> beta, int cutoff);

/// D(alpha) Pi D(alpha)^+ = D(2 alpha) Pi, restricted to n, m < cutoff.
Eigen::MatrixXcd displaced_parity(std::complex<double> alpha, int cutoff);

enum class WignerPlane { real, imaginary };

/// Symmetric section grid: coordinates -extent, -extent+step, ..., extent.
struct SectionGrid {
  double extent = 4.0;
  double step = 0.1;

  /// |q| <= |alpha| + 2 at step 0.1.
  static SectionGrid for_amplitude(double abs_alpha);
  [[nodiscard]] int points() const;
  [[nodiscard]] double coordinate(int i) const { return -extent + i * step; }
};

struct WignerSection {
  WignerPlane plane = WignerPlane::real;
  SectionGrid grid;
  /// values(i, j) = W at q1 = coordinate(i), q2 = coordinate(j), with
  /// alpha_k = q_k (real plane) or i q_k (imaginary plane).
  Eigen::MatrixXd values;
};

/// W(alpha1, alpha2) = (4/pi^2) Tr[rho (D1 Pi1 D1^+) (D2 Pi2 D2^+)] on a
/// two-dimensional section. Warns when the section reaches amplitudes whose
/// coherent states are not representable at the cutoff.
WignerSection wigner_section(const DensityMatrix<>& rho, WignerPlane plane, const SectionGrid& grid);

/// Single point of the joint Wigner function.
double wigner_point(const DensityMatrix<>& rho, std::complex<double> alpha1, std::complex<double> alpha2);

/// CSV with header coord1,coord2,W.
void write_csv(std::ostream& os, const WignerSection& section);

}  // namespace dopocat
