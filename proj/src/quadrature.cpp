#include "dopocat/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include "dopocat/fock.hpp"
#include "dopocat/log.hpp"

namespace dopocat {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using cd = std::complex<double>;

QuadratureGrid QuadratureGrid::covering(double half_width, double step) {
  if (!(step > 0) || !(half_width > 0)) throw std::invalid_argument("QuadratureGrid: L and step must be positive");
  const double cells = std::ceil(2.0 * half_width / step - 1e-9);
  return {cells * step / 2.0, step};
}

QuadratureGrid QuadratureGrid::for_amplitude(double abs_alpha, double step) {
  return covering(std::max(8.0, std::numbers::sqrt2 * abs_alpha + 6.0), step);
}

void QuadratureGrid::validate() const {
  if (!(half_width > 0) || !(step > 0))
    throw std::invalid_argument("QuadratureGrid: L and step must be positive");
  const double cells = 2.0 * half_width / step;
  if (std::abs(cells - std::round(cells)) > 1e-6)
    throw std::invalid_argument("QuadratureGrid: 2L/step must be an integer");
}

int QuadratureGrid::points() const {
  validate();
  return static_cast<int>(std::lround(2.0 * half_width / step));
}

VectorXd QuadratureGrid::coordinates() const {
  VectorXd x(points());
  for (int i = 0; i < x.size(); ++i) x(i) = coordinate(i);
  return x;
}

MatrixXd hermite_wavefunction_table(int cutoff, const QuadratureGrid& grid) {
  if (cutoff < 1 || cutoff > 200)
    throw std::invalid_argument("hermite_wavefunction_table: cutoff outside [1, 200]");
  const Eigen::RowVectorXd x = grid.coordinates().transpose();
  MatrixXd psi(cutoff, x.size());
  const double norm0 = std::pow(std::numbers::pi, -0.25);
  psi.row(0) = norm0 * (-0.5 * x.array().square()).exp();
  if (cutoff > 1) psi.row(1) = std::numbers::sqrt2 * x.cwiseProduct(psi.row(0));
  for (int n = 2; n < cutoff; ++n) {
    psi.row(n) = std::sqrt(2.0 / n) * x.cwiseProduct(psi.row(n - 1)) - std::sqrt((n - 1.0) / n) * psi.row(n - 2);
  }
  if (!psi.allFinite()) throw std::overflow_error("hermite_wavefunction_table: recurrence overflow");
  return psi;
}

std::shared_ptr<const HermiteTables> hermite_tables(int cutoff, const QuadratureGrid& grid) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, std::shared_ptr<const HermiteTables>> cache;
  const auto key = std::make_tuple(cutoff, grid.half_width, grid.step);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto tables = std::make_shared<HermiteTables>();
  tables->cutoff = cutoff;
  tables->grid = grid;
  tables->psi = hermite_wavefunction_table(cutoff, grid);
  tables->pairs.resize(cutoff * cutoff, tables->psi.cols());
  for (int n = 0; n < cutoff; ++n)
    for (int m = 0; m < cutoff; ++m)
      tables->pairs.row(n * cutoff + m) = tables->psi.row(n).cwiseProduct(tables->psi.row(m));
  std::lock_guard lock(mutex);
  // Bounded: sweeps use a handful of (cutoff, grid) pairs.
  if (cache.size() > 64) cache.clear();
  return cache.emplace(key, std::move(tables)).first->second;
}

namespace {

// Phase-rotated copy so that momentum densities reuse the position kernel:
// rho'_{nm} = (-i)^n i^m rho_{nm}, n and m the total photon numbers.
Eigen::MatrixXcd momentum_frame(const DensityMatrix<>& rho) {
  const ModeSpace s = rho.space();
  Eigen::VectorXcd phase(s.dim());
  static const cd powers[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};  // (-i)^k
  for (int i = 0; i < s.dim(); ++i) {
    const int n = s.n_modes == 1 ? i : i / s.cutoff + i % s.cutoff;
    phase(i) = powers[n % 4];
  }
  return phase.asDiagonal() * rho.matrix() * phase.conjugate().asDiagonal();
}

// For Hermitian rho and real v, v^T rho v = v^T Re(rho) v.
MatrixXd frame_real_part(const DensityMatrix<>& rho, QuadratureKind kind) {
  return kind == QuadratureKind::position ? MatrixXd(rho.matrix().real())
                                          : MatrixXd(momentum_frame(rho).real());
}

void finalize(MatrixXd& values, double cell_area, const char* where) {
  const double worst = values.minCoeff();
  if (worst < -kNegativeDensityTol) {
    std::ostringstream os;
    os << where << ": negative density " << worst;
    throw std::domain_error(os.str());
  }
  values = values.cwiseMax(0.0);
  const double total = values.sum() * cell_area;
  if (std::abs(total - 1.0) > kNormalizationErrorTol) {
    std::ostringstream os;
    os << where << ": distribution integrates to " << total << " (grid too small?)";
    throw std::domain_error(os.str());
  }
}

}  // namespace

JointDistribution joint_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid,
                                     QuadratureKind kind) {
  detail::require_two(rho.space(), "joint_distribution");
  const int c = rho.space().cutoff;
  const int nx = grid.points();
  const auto tables = hermite_tables(c, grid);
  const MatrixXd& psi = tables->psi;
  const MatrixXd r = frame_real_part(rho, kind);

  // q((n1, m1), x2) = sum_{n2, m2} psi_n2(x2) r((n1,n2),(m1,m2)) psi_m2(x2)
  MatrixXd q(c * c, nx);
  MatrixXd half(c * c, nx);
  for (int m1 = 0; m1 < c; ++m1) {
    half.noalias() = r.middleCols(m1 * c, c) * psi;  // rows (n1, n2)
    for (int n1 = 0; n1 < c; ++n1)
      q.row(n1 * c + m1) = half.middleRows(n1 * c, c).cwiseProduct(psi).colwise().sum();
  }
  // P(x1, x2) = sum_{n1, m1} psi_n1(x1) psi_m1(x1) q((n1, m1), x2)
  JointDistribution out{grid, kind, MatrixXd(nx, nx)};
  out.values.noalias() = tables->pairs.transpose() * q;
  finalize(out.values, grid.step * grid.step,
           kind == QuadratureKind::position ? "joint_position_distribution"
                                            : "joint_momentum_distribution");
  return out;
}

JointDistribution joint_position_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid) {
  return joint_distribution(rho, grid, QuadratureKind::position);
}

JointDistribution joint_momentum_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid) {
  return joint_distribution(rho, grid, QuadratureKind::momentum);
}

VectorXd quadrature_distribution(const DensityMatrix<>& rho, const QuadratureGrid& grid,
                                 QuadratureKind kind) {
  detail::require_single(rho.space(), "quadrature_distribution");
  const auto tables = hermite_tables(rho.space().cutoff, grid);
  const MatrixXd r = frame_real_part(rho, kind);
  MatrixXd values = (r * tables->psi).cwiseProduct(tables->psi).colwise().sum().transpose();
  finalize(values, grid.step, "quadrature_distribution");
  return values;
}

bool check_grid_coverage(const DensityMatrix<>& rho, const QuadratureGrid& grid) {
  const ModeSpace s = rho.space();
  const ModeSpace single = ModeSpace::single(s.cutoff);
  std::vector<Operator<>> lowering;
  if (s.n_modes == 1) {
    lowering.push_back(annihilation(single));
  } else {
    lowering.push_back(annihilation(s, 1));
    lowering.push_back(annihilation(s, 2));
  }
  const double vacuum_width = 1.0 / std::numbers::sqrt2;
  double needed = 0.0;
  for (const auto& a : lowering) {
    const Eigen::MatrixXcd x = (a.matrix() + a.matrix().adjoint()) / std::numbers::sqrt2;
    const Eigen::MatrixXcd p = (a.matrix() - a.matrix().adjoint()) / cd(0.0, std::numbers::sqrt2);
    for (const auto* q : {&x, &p}) {
      const double second = (rho.matrix() * (*q) * (*q)).trace().real();
      needed = std::max(needed, std::sqrt(std::max(second, 0.0)) + 6.0 * vacuum_width);
    }
  }
  if (grid.half_width < needed) {
    std::ostringstream os;
    os << "quadrature grid half-width " << grid.half_width << " below required " << needed;
    warn(os.str());
    return false;
  }
  return true;
}

void write_csv(std::ostream& os, const JointDistribution& dist) {
  os << "coord1,coord2,value\n";
  char line[96];
  const int n = dist.grid.points();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::snprintf(line, sizeof line, "%.6f,%.6f,%.12e\n", dist.grid.coordinate(i),
                    dist.grid.coordinate(j), dist.values(i, j));
      os << line;
    }
  }
}

}  // namespace dopocat
