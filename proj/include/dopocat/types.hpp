#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dopocat {

template <typename T>
using Complex = std::complex<T>;
template <typename T>
using CMatrix = Eigen::Matrix<Complex<T>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using CVector = Eigen::Matrix<Complex<T>, Eigen::Dynamic, 1>;
template <typename T>
using RMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using RVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Truncated Fock space of one or two bosonic modes, |0>..|cutoff-1> per mode.
///
/// Two-mode basis index is n1 * cutoff + n2: mode 1 is the slow (outer)
/// tensor index everywhere in this library.
struct ModeSpace {
  int cutoff = 2;
  int n_modes = 1;

  static ModeSpace single(int cutoff) { return checked({cutoff, 1}); }
  static ModeSpace two(int cutoff) { return checked({cutoff, 2}); }

  static ModeSpace checked(ModeSpace s) {
    if (s.cutoff < 2) throw std::invalid_argument("ModeSpace: cutoff must be >= 2");
    if (s.n_modes != 1 && s.n_modes != 2)
      throw std::invalid_argument("ModeSpace: n_modes must be 1 or 2");
    return s;
  }

  [[nodiscard]] int dim() const { return n_modes == 1 ? cutoff : cutoff * cutoff; }
  [[nodiscard]] int index(int n1, int n2) const { return n1 * cutoff + n2; }

  friend bool operator==(const ModeSpace&, const ModeSpace&) = default;
};

inline void require_same_space(const ModeSpace& a, const ModeSpace& b, const char* where) {
  if (!(a == b))
    throw std::invalid_argument(std::string(where) + ": mode spaces differ");
}

/// Square complex matrix acting on a ModeSpace.
template <typename T = double>
class Operator {
 public:
  Operator(ModeSpace space, CMatrix<T> m) : space_(space), m_(std::move(m)) {
    if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
      throw std::invalid_argument("Operator: matrix dimension does not match space");
  }

  static Operator zero(ModeSpace space) {
    return {space, CMatrix<T>::Zero(space.dim(), space.dim())};
  }
  static Operator identity(ModeSpace space) {
    return {space, CMatrix<T>::Identity(space.dim(), space.dim())};
  }

  [[nodiscard]] const ModeSpace& space() const { return space_; }
  [[nodiscard]] const CMatrix<T>& matrix() const { return m_; }
  [[nodiscard]] Operator adjoint() const { return {space_, m_.adjoint()}; }

  Operator& operator+=(const Operator& o) {
    require_same_space(space_, o.space_, "Operator +=");
    m_ += o.m_;
    return *this;
  }
  Operator& operator-=(const Operator& o) {
    require_same_space(space_, o.space_, "Operator -=");
    m_ -= o.m_;
    return *this;
  }

  friend Operator operator+(Operator a, const Operator& b) { return a += b; }
  friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
  friend Operator operator*(const Operator& a, const Operator& b) {
    require_same_space(a.space_, b.space_, "Operator *");
    return {a.space_, a.m_ * b.m_};
  }
  friend Operator operator*(Complex<T> s, const Operator& a) { return {a.space_, s * a.m_}; }
  friend Operator operator*(T s, const Operator& a) { return {a.space_, s * a.m_}; }

 private:
  ModeSpace space_;
  CMatrix<T> m_;
};

template <typename T>
Operator<T> commutator(const Operator<T>& a, const Operator<T>& b) {
  return a * b - b * a;
}

/// Normalized state vector.
template <typename T = double>
class StateVector {
 public:
  /// Normalizes `amplitudes`; a zero vector is rejected.
  StateVector(ModeSpace space, CVector<T> amplitudes) : space_(space), v_(std::move(amplitudes)) {
    if (v_.size() != space_.dim())
      throw std::invalid_argument("StateVector: length does not match space");
    const T n = v_.norm();
    if (!(n > T(1e-300))) throw std::domain_error("StateVector: zero vector cannot be normalized");
    v_ /= n;
  }

  [[nodiscard]] const ModeSpace& space() const { return space_; }
  [[nodiscard]] const CVector<T>& amplitudes() const { return v_; }
  [[nodiscard]] Complex<T> inner(const StateVector& o) const {
    require_same_space(space_, o.space_, "StateVector inner");
    return v_.dot(o.v_);
  }

 private:
  ModeSpace space_;
  CVector<T> v_;
};

/// Hermitian, unit-trace matrix. Hermiticity and trace are checked on
/// construction; positivity is checked on demand (it needs a factorization).
template <typename T = double>
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-9;
  static constexpr double kTraceTol = 1e-8;

  DensityMatrix(ModeSpace space, CMatrix<T> m) : space_(space), m_(std::move(m)) {
    if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
      throw std::invalid_argument("DensityMatrix: dimension does not match space");
    if (hermiticity_error() > kHermitianTol)
      throw std::domain_error("DensityMatrix: not Hermitian");
    if (std::abs(trace_error()) > kTraceTol)
      throw std::domain_error("DensityMatrix: trace differs from 1");
  }

  static DensityMatrix pure(const StateVector<T>& psi) {
    const auto& v = psi.amplitudes();
    CMatrix<T> m = v * v.adjoint();
    return {psi.space(), std::move(m)};
  }

  static DensityMatrix vacuum(ModeSpace space) {
    CMatrix<T> m = CMatrix<T>::Zero(space.dim(), space.dim());
    m(0, 0) = T(1);
    return {space, std::move(m)};
  }

  [[nodiscard]] const ModeSpace& space() const { return space_; }
  [[nodiscard]] const CMatrix<T>& matrix() const { return m_; }
  [[nodiscard]] T trace_error() const { return m_.trace().real() - T(1); }
  [[nodiscard]] T hermiticity_error() const {
    return (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  }

 private:
  ModeSpace space_;
  CMatrix<T> m_;
};

}  // namespace dopocat
