#pragma once

// Master-equation model of two dissipatively coupled DOPOs and its RK4
// integrator.
//
//   d rho/dt = -i[H, rho] + L_s(rho) + L_d(rho) + L_c(rho)
//   H        = sum_k -i S [(a_k^+)^2 - a_k^2]
//   L_s      = sum_k D(gamma_s, a_k)       (or the squeezed-bath form)
//   L_d      = sum_k D(gamma_d, a_k^2)
//   L_c      = D(gamma_c, a_1 - a_2)
//   D(G, L)  = (G/2) [2 L rho L^+ - {L^+ L, rho}]
//
// All rates are ratios to gamma_d.

#include <array>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseCore>

#include "dopocat/types.hpp"

namespace dopocat {

struct ModelParams {
  double pump = 1.0;  ///< S
  double gamma_s = 0.0;
  double gamma_d = 1.0;
  double gamma_c = 0.0;
  double gamma_sq = 0.0;  ///< squeezing intensity; 0 is the ordinary vacuum bath
  double theta_sq = std::numbers::pi;

  void validate() const;

  /// N = sinh^2(gamma_sq).
  [[nodiscard]] double squeeze_n() const;
  /// M = sinh(gamma_sq) cosh(gamma_sq) exp(-i theta_sq).
  [[nodiscard]] std::complex<double> squeeze_m() const;
  /// Coherent amplitude of the two-photon steady state, i sqrt(2 S / gamma_d).
  [[nodiscard]] std::complex<double> steady_amplitude() const;
};

struct IntegrationControls {
  double dt = 2e-3;
  double t_final = 8.0;
  int sample_every = 25;

  void validate() const;
  [[nodiscard]] long steps() const;
};

struct SampleDiagnostics {
  double time = 0.0;
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
};

struct EvolutionTrace {
  std::vector<double> times;
  std::vector<SampleDiagnostics> diagnostics;
  /// Filled only when requested in IntegrationOptions.
  std::vector<DensityMatrix<>> snapshots;
  std::optional<DensityMatrix<>> final_state;
  bool stopped_by_observer = false;
};

/// Called at t = 0, every `sample_every` steps and at the horizon. Returning
/// false ends the integration after this sample.
using Observer = std::function<bool(double t, const DensityMatrix<>& rho)>;

struct IntegrationOptions {
  bool keep_snapshots = false;
  bool check_positivity = true;
};

/// Integration aborted on a conservation or positivity violation.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  [[nodiscard]] double time() const { return time_; }

 private:
  double time_;
};

inline constexpr double kTraceAbortTol = 1e-6;
inline constexpr double kPositivityAbortTol = 1e-6;
inline constexpr double kHermiticityAbortTol = 1e-9;

// -- dense reference forms --------------------------------------------------

Operator<> hamiltonian(const ModelParams& params, ModeSpace space);

/// (G/2)[2 L rho L^+ - L^+ L rho - rho L^+ L].
Eigen::MatrixXcd dissipator(double rate, const Operator<>& jump, const DensityMatrix<>& rho);

/// Single-photon loss into a squeezed bath, summed over the modes of rho.
Eigen::MatrixXcd squeezed_single_photon_dissipator(const ModelParams& params,
                                                   const DensityMatrix<>& rho);

/// Full right-hand side by direct matrix products. Two-mode spaces include
/// the collective term; single-mode spaces drop it.
Eigen::MatrixXcd liouvillian_rhs(const DensityMatrix<>& rho, const ModelParams& params);

// -- fast generator ---------------------------------------------------------

/// Density matrix split by total photon-number parity. Every operator in the
/// model has definite parity, so a state that starts block-diagonal (the
/// vacuum does) stays block-diagonal.
struct ParityBlocks {
  std::array<Eigen::MatrixXcd, 2> block;  // [0] even, [1] odd
};

/// Natural-basis indices of the even ([0]) and odd ([1]) parity sectors.
std::array<std::vector<int>, 2> parity_sectors(ModeSpace space);

/// Largest |entry| coupling the two parity sectors.
double parity_coherence(const Eigen::MatrixXcd& rho, ModeSpace space);

ParityBlocks split_parity(const Eigen::MatrixXcd& rho, ModeSpace space);
Eigen::MatrixXcd merge_parity(const ParityBlocks& blocks, ModeSpace space);

/// Right-hand side with all static operator products precomputed in sparse
/// form. Arguments must be Hermitian; that is all RK4 ever feeds it.
///
/// Scratch buffers are per instance: share one instance between threads
/// only behind external synchronization.
class Liouvillian {
 public:
  using Sparse = Eigen::SparseMatrix<std::complex<double>>;

  Liouvillian(const ModelParams& params, ModeSpace space);

  [[nodiscard]] const ModeSpace& space() const { return space_; }

  /// out = L(rho) for a general Hermitian rho.
  void apply(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& out) const;
  [[nodiscard]] Eigen::MatrixXcd operator()(const Eigen::MatrixXcd& rho) const;

  /// Same generator restricted to parity-block-diagonal states.
  void apply(const ParityBlocks& rho, ParityBlocks& out) const;

 private:
  // coef * A rho B, evaluated as ((rho A^+)^+ B).
  struct Sandwich {
    std::complex<double> coef;
    int parity;  // 0 when A, B conserve parity, 1 when they flip it
    Sparse a_adjoint;
    Sparse b;
    // Sector blocks [s ^ parity][s] for target sector s.
    std::array<Sparse, 2> a_adjoint_block;
    std::array<Sparse, 2> b_block;
  };

  ModeSpace space_;
  Sparse generator_adjoint_;  // G^+ with G = -iH - (1/2) sum rate L^+L + squeeze terms
  std::array<Sparse, 2> generator_adjoint_block_;
  std::vector<Sandwich> sandwiches_;
  mutable Eigen::MatrixXcd z_, t1_, t2_;
  mutable std::array<Eigen::MatrixXcd, 2> zb_;
};

/// Estimate of the largest |eigenvalue| of the generator, from power
/// iteration on Hermitian matrices (deterministic start vector).
double spectral_radius_estimate(const Liouvillian& generator, int iterations = 80);

/// dt * radius is kept below this for the fixed-step RK4 scheme.
inline constexpr double kRk4StabilityMargin = 2.5;

/// `controls` with dt reduced, if needed, to dt * radius <= kRk4StabilityMargin.
/// The sampling interval dt * sample_every is preserved by subdividing it
/// into a whole number of steps.
IntegrationControls stable_controls(const IntegrationControls& controls, const ModelParams& params,
                                    ModeSpace space);

EvolutionTrace integrate(const DensityMatrix<>& rho0, const ModelParams& params,
                         const IntegrationControls& controls, const Observer& observer = {},
                         const IntegrationOptions& options = {});

/// One DOPO (no collective term) evolved from the vacuum.
EvolutionTrace integrate_single_mode(const ModelParams& params, const IntegrationControls& controls,
                                     int cutoff, const Observer& observer = {},
                                     const IntegrationOptions& options = {});

}  // namespace dopocat
