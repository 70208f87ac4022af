#pragma once

// Truncated Fock-space operators and reference states.

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "dopocat/log.hpp"
#include "dopocat/types.hpp"

namespace dopocat {

enum class CatParity { even, odd };

/// Coherent-state tail mass above which a truncation warning is emitted.
inline constexpr double kTailWarn = 1e-8;
/// Tail mass above which construction fails.
inline constexpr double kTailError = 1e-4;

namespace detail {

inline void require_single(const ModeSpace& s, const char* where) {
  if (s.n_modes != 1) throw std::invalid_argument(std::string(where) + ": single-mode space required");
}
inline void require_two(const ModeSpace& s, const char* where) {
  if (s.n_modes != 2) throw std::invalid_argument(std::string(where) + ": two-mode space required");
}

}  // namespace detail

/// <n-1|a|n> = sqrt(n).
template <typename T = double>
Operator<T> annihilation(ModeSpace space) {
  detail::require_single(space, "annihilation");
  CMatrix<T> m = CMatrix<T>::Zero(space.cutoff, space.cutoff);
  for (int n = 1; n < space.cutoff; ++n) m(n - 1, n) = std::sqrt(T(n));
  return {space, std::move(m)};
}

template <typename T = double>
Operator<T> creation(ModeSpace space) {
  return annihilation<T>(space).adjoint();
}

template <typename T = double>
Operator<T> number(ModeSpace space) {
  detail::require_single(space, "number");
  CMatrix<T> m = CMatrix<T>::Zero(space.cutoff, space.cutoff);
  for (int n = 0; n < space.cutoff; ++n) m(n, n) = T(n);
  return {space, std::move(m)};
}

/// diag((-1)^n) on one mode, or the total parity (-1)^(n1+n2) on two modes.
template <typename T = double>
Operator<T> parity(ModeSpace space) {
  CMatrix<T> m = CMatrix<T>::Zero(space.dim(), space.dim());
  for (int i = 0; i < space.dim(); ++i) {
    const int n = space.n_modes == 1 ? i : i / space.cutoff + i % space.cutoff;
    m(i, i) = (n % 2 == 0) ? T(1) : T(-1);
  }
  return {space, std::move(m)};
}

/// op (x) 1 for mode_index 1, 1 (x) op for mode_index 2.
template <typename T>
Operator<T> embed(const Operator<T>& op, int mode_index, ModeSpace target) {
  detail::require_single(op.space(), "embed");
  detail::require_two(target, "embed");
  if (op.space().cutoff != target.cutoff)
    throw std::invalid_argument("embed: cutoff mismatch");
  const CMatrix<T> id = CMatrix<T>::Identity(target.cutoff, target.cutoff);
  switch (mode_index) {
    case 1: return {target, Eigen::kroneckerProduct(op.matrix(), id).eval()};
    case 2: return {target, Eigen::kroneckerProduct(id, op.matrix()).eval()};
    default: throw std::invalid_argument("embed: mode_index must be 1 or 2");
  }
}

/// Mode-k annihilation operator on a two-mode space.
template <typename T = double>
Operator<T> annihilation(ModeSpace two_mode, int mode_index) {
  return embed(annihilation<T>(ModeSpace::single(two_mode.cutoff)), mode_index, two_mode);
}

/// Mass of the untruncated coherent state beyond the cutoff.
template <typename T>
T coherent_tail_mass(Complex<T> alpha, int cutoff) {
  const T r2 = std::norm(alpha);
  T term = std::exp(-r2);
  T kept = term;
  for (int n = 1; n < cutoff; ++n) {
    term *= r2 / T(n);
    kept += term;
  }
  return std::max(T(0), T(1) - kept);
}

/// Truncated coherent state, renormalized on the kept levels.
template <typename T = double>
StateVector<T> coherent_state(Complex<T> alpha, ModeSpace space) {
  detail::require_single(space, "coherent_state");
  const T tail = coherent_tail_mass(alpha, space.cutoff);
  if (tail > T(kTailError)) {
    std::ostringstream os;
    os << "coherent_state: truncated tail mass " << tail << " exceeds " << kTailError
       << " (|alpha|^2=" << std::norm(alpha) << ", cutoff=" << space.cutoff << ")";
    throw std::domain_error(os.str());
  }
  if (tail > T(kTailWarn)) {
    std::ostringstream os;
    os << "coherent_state: truncated tail mass " << tail << " at cutoff " << space.cutoff;
    warn(os.str());
  }
  CVector<T> c(space.cutoff);
  c(0) = std::exp(-std::norm(alpha) / T(2));
  for (int n = 1; n < space.cutoff; ++n) c(n) = c(n - 1) * alpha / std::sqrt(T(n));
  return {space, std::move(c)};
}

/// |alpha> (x) |beta> on a two-mode space.
template <typename T = double>
StateVector<T> product_coherent(Complex<T> alpha1, Complex<T> alpha2, ModeSpace two_mode) {
  detail::require_two(two_mode, "product_coherent");
  const auto single = ModeSpace::single(two_mode.cutoff);
  CVector<T> v = Eigen::kroneckerProduct(coherent_state(alpha1, single).amplitudes(),
                                         coherent_state(alpha2, single).amplitudes());
  return {two_mode, std::move(v)};
}

/// (|alpha> + sign |-alpha>) normalized with the exact overlap.
template <typename T = double>
StateVector<T> cat_state(Complex<T> alpha, int sign, ModeSpace space) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("cat_state: sign must be +1 or -1");
  const CVector<T> v = coherent_state(alpha, space).amplitudes() +
                       T(sign) * coherent_state(-alpha, space).amplitudes();
  return {space, v};
}

/// even: |a,a> + |-a,-a>;  odd: |a,-a> + |-a,a>.
template <typename T = double>
StateVector<T> entangled_cat(Complex<T> alpha, CatParity parity, ModeSpace space) {
  detail::require_two(space, "entangled_cat");
  const auto single = ModeSpace::single(space.cutoff);
  const CVector<T> p = coherent_state(alpha, single).amplitudes();
  const CVector<T> m = coherent_state(-alpha, single).amplitudes();
  CVector<T> v = parity == CatParity::even
                     ? (Eigen::kroneckerProduct(p, p) + Eigen::kroneckerProduct(m, m)).eval()
                     : (Eigen::kroneckerProduct(p, m) + Eigen::kroneckerProduct(m, p)).eval();
  return {space, std::move(v)};
}

/// (|a,a><a,a| + |-a,-a><-a,-a|) / 2.
template <typename T = double>
DensityMatrix<T> classical_mixture(Complex<T> alpha, ModeSpace space) {
  detail::require_two(space, "classical_mixture");
  const CVector<T> p = product_coherent(alpha, alpha, space).amplitudes();
  const CVector<T> m = product_coherent(-alpha, -alpha, space).amplitudes();
  CMatrix<T> rho = (p * p.adjoint() + m * m.adjoint()) / T(2);
  return {space, std::move(rho)};
}

/// Reduced state of mode `keep` (1 or 2).
template <typename T>
DensityMatrix<T> partial_trace(const DensityMatrix<T>& rho, int keep) {
  detail::require_two(rho.space(), "partial_trace");
  if (keep != 1 && keep != 2) throw std::invalid_argument("partial_trace: keep must be 1 or 2");
  const int c = rho.space().cutoff;
  const auto& m = rho.matrix();
  CMatrix<T> r = CMatrix<T>::Zero(c, c);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j)
      for (int k = 0; k < c; ++k)
        r(i, j) += keep == 1 ? m(i * c + k, j * c + k) : m(k * c + i, k * c + j);
  // Drop rounding asymmetry before the Hermiticity check.
  r = (r + r.adjoint()) / T(2);
  r /= r.trace().real();
  return {ModeSpace::single(c), std::move(r)};
}

/// rho1 (x) rho2.
template <typename T>
DensityMatrix<T> tensor(const DensityMatrix<T>& a, const DensityMatrix<T>& b) {
  detail::require_single(a.space(), "tensor");
  detail::require_single(b.space(), "tensor");
  if (a.space().cutoff != b.space().cutoff) throw std::invalid_argument("tensor: cutoff mismatch");
  return {ModeSpace::two(a.space().cutoff),
          Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval()};
}

}  // namespace dopocat
