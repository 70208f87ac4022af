#pragma once

#include <complex>
#include <random>
#include <string>
#include <vector>

#include "dopocat/log.hpp"
#include "dopocat/types.hpp"

namespace testing {

inline Eigen::MatrixXcd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = {g(rng), g(rng)};
  return m;
}

/// G G^+ / Tr, with G supported on the lowest `levels` states of each mode.
inline dopocat::DensityMatrix<> random_density(dopocat::ModeSpace space, int levels, int rank,
                                               std::mt19937_64& rng) {
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(space.dim(), rank);
  const Eigen::MatrixXcd r = random_matrix(space.dim(), rank, rng);
  for (int i = 0; i < space.dim(); ++i) {
    const int n1 = space.n_modes == 1 ? i : i / space.cutoff;
    const int n2 = space.n_modes == 1 ? 0 : i % space.cutoff;
    if (n1 < levels && n2 < levels) g.row(i) = r.row(i);
  }
  Eigen::MatrixXcd rho = g * g.adjoint();
  rho /= rho.trace().real();
  rho = (rho + rho.adjoint()).eval() / 2.0;
  return {space, rho};
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    dopocat::set_warning_handler([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { dopocat::set_warning_handler({}); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  [[nodiscard]] bool contains(const std::string& needle) const {
    for (const auto& m : messages)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }

  std::vector<std::string> messages;
};

}  // namespace testing
