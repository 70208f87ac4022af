#include "dopocat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include "dopocat/fock.hpp"
#include "dopocat/log.hpp"

namespace dopocat {

using Eigen::MatrixXcd;
using cd = std::complex<double>;

double purity(const DensityMatrix<>& rho) {
  // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
  return rho.matrix().squaredNorm();
}

double fidelity_to_pure(const DensityMatrix<>& rho, const StateVector<>& psi) {
  require_same_space(rho.space(), psi.space(), "fidelity_to_pure");
  const auto& v = psi.amplitudes();
  return std::clamp(v.dot(rho.matrix() * v).real(), 0.0, 1.0);
}

FidelityReport max_cat_fidelity_single_mode(const ModelParams& params, const IntegrationControls& controls,
                                            int cutoff) {
  ModelParams p = params;
  p.gamma_c = 0.0;
  p.validate();
  const auto target = cat_state(p.steady_amplitude(), +1, ModeSpace::single(cutoff));
  FidelityReport report;
  integrate_single_mode(p, controls, cutoff, [&](double t, const DensityMatrix<>& rho) {
    const double f = fidelity_to_pure(rho, target);
    report.times.push_back(t);
    report.fidelity.push_back(f);
    if (report.fidelity.size() == 1 || f > report.max) {
      report.max = f;
      report.argmax_time = t;
    }
    return true;
  });
  if (report.times.size() > 1 && report.argmax_time == report.times.back()) {
    std::ostringstream os;
    os << "cat fidelity maximum at the last sample t=" << report.argmax_time << "; horizon may be too short";
    warn(os.str());
  }
  return report;
}

MatrixXcd displacement_matrix(cd beta, int cutoff) {
  if (cutoff < 1) throw std::invalid_argument("displacement_matrix: cutoff must be positive");
  // Along each diagonal k = n - m,
  //   g_m = sqrt(m!/(m+k)!) |beta|^k e^{-|beta|^2/2} L_m^(k)(|beta|^2)
  // obeys a three-term recurrence in m with bounded terms.
  const double r = std::abs(beta);
  const double x = r * r;
  const double phase = std::arg(beta);
  MatrixXcd d = MatrixXcd::Zero(cutoff, cutoff);
  std::vector<double> g(cutoff);
  for (int k = 0; k < cutoff; ++k) {
    const int len = cutoff - k;
    if (r == 0.0) {
      g.assign(cutoff, 0.0);
      if (k == 0) g.assign(cutoff, 1.0);
    } else {
      g[0] = std::exp(-x / 2.0 + k * std::log(r) - std::lgamma(k + 1.0) / 2.0);
      if (len > 1) g[1] = g[0] * (1.0 + k - x) / std::sqrt(k + 1.0);
      for (int m = 1; m + 1 < len; ++m) {
        g[m + 1] = ((2.0 * m + 1.0 + k - x) * g[m] - std::sqrt(m * (m + k + 0.0)) * g[m - 1]) /
                   std::sqrt((m + 1.0) * (m + k + 1.0));
      }
    }
    const cd lower = std::polar(1.0, k * phase);
    const cd upper = (k % 2 == 0 ? 1.0 : -1.0) * std::conj(lower);
    for (int m = 0; m < len; ++m) {
      d(m + k, m) = g[m] * lower;
      if (k > 0) d(m, m + k) = g[m] * upper;
    }
  }
  return d;
}

MatrixXcd displaced_parity(cd alpha, int cutoff) {
  MatrixXcd a = displacement_matrix(2.0 * alpha, cutoff);
  for (int m = 1; m < cutoff; m += 2) a.col(m) = -a.col(m);
  return a;
}

SectionGrid SectionGrid::for_amplitude(double abs_alpha) {
  const double step = 0.1;
  return {std::ceil((abs_alpha + 2.0) / step - 1e-9) * step, step};
}

int SectionGrid::points() const {
  if (!(extent > 0) || !(step > 0)) throw std::invalid_argument("SectionGrid: extent and step must be positive");
  return static_cast<int>(std::lround(2.0 * extent / step)) + 1;
}

namespace {

constexpr double kWignerNorm = 4.0 / (std::numbers::pi * std::numbers::pi);

// T(n1, m1) = sum_{n2, m2} rho((n1,n2),(m1,m2)) A2(m2, n2)
MatrixXcd contract_mode2(const MatrixXcd& rho, const MatrixXcd& a2_transposed, int c) {
  MatrixXcd t(c, c);
  for (int n1 = 0; n1 < c; ++n1)
    for (int m1 = 0; m1 < c; ++m1) t(n1, m1) = rho.block(n1 * c, m1 * c, c, c).cwiseProduct(a2_transposed).sum();
  return t;
}

void warn_if_unrepresentable(double max_abs_alpha, int cutoff) {
  if (max_abs_alpha * max_abs_alpha > cutoff) {
    std::ostringstream os;
    os << "Wigner section reaches |alpha| = " << max_abs_alpha << ", beyond the cutoff " << cutoff
       << " (|alpha|^2 > cutoff)";
    warn(os.str());
  }
}

}  // namespace

double wigner_point(const DensityMatrix<>& rho, cd alpha1, cd alpha2) {
  detail::require_two(rho.space(), "wigner_point");
  const int c = rho.space().cutoff;
  const MatrixXcd t = contract_mode2(rho.matrix(), displaced_parity(alpha2, c).transpose(), c);
  return kWignerNorm * t.cwiseProduct(displaced_parity(alpha1, c).transpose()).sum().real();
}

WignerSection wigner_section(const DensityMatrix<>& rho, WignerPlane plane, const SectionGrid& grid) {
  detail::require_two(rho.space(), "wigner_section");
  const int c = rho.space().cutoff;
  const int n = grid.points();
  warn_if_unrepresentable(grid.extent, c);
  const cd unit = plane == WignerPlane::real ? cd(1.0, 0.0) : cd(0.0, 1.0);
  std::vector<MatrixXcd> parity_t(n);
  for (int i = 0; i < n; ++i) parity_t[i] = displaced_parity(unit * grid.coordinate(i), c).transpose();

  WignerSection out{plane, grid, Eigen::MatrixXd(n, n)};
  for (int j = 0; j < n; ++j) {
    const MatrixXcd t = contract_mode2(rho.matrix(), parity_t[j], c);
    for (int i = 0; i < n; ++i) out.values(i, j) = kWignerNorm * t.cwiseProduct(parity_t[i]).sum().real();
  }
  if (!out.values.allFinite()) throw std::domain_error("wigner_section: non-finite value");
  return out;
}

void write_csv(std::ostream& os, const WignerSection& section) {
  os << "coord1,coord2,W\n";
  char line[96];
  const int n = section.grid.points();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::snprintf(line, sizeof line, "%.6f,%.6f,%.12e\n", section.grid.coordinate(i),
                    section.grid.coordinate(j), section.values(i, j));
      os << line;
    }
}

}  // namespace dopocat
