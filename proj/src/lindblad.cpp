#include "dopocat/lindblad.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dopocat/fock.hpp"

namespace dopocat {

using Eigen::MatrixXcd;
using cd = std::complex<double>;

void ModelParams::validate() const {
  if (!(pump >= 0) || !(gamma_s >= 0) || !(gamma_c >= 0) || !(gamma_sq >= 0))
    throw std::invalid_argument("ModelParams: rates must be non-negative");
  if (!(gamma_d > 0)) throw std::invalid_argument("ModelParams: gamma_d must be positive");
  if (!std::isfinite(theta_sq)) throw std::invalid_argument("ModelParams: theta_sq must be finite");
}

double ModelParams::squeeze_n() const {
  const double s = std::sinh(gamma_sq);
  return s * s;
}

cd ModelParams::squeeze_m() const {
  return std::sinh(gamma_sq) * std::cosh(gamma_sq) * std::polar(1.0, -theta_sq);
}

cd ModelParams::steady_amplitude() const { return {0.0, std::sqrt(2.0 * pump / gamma_d)}; }

void IntegrationControls::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("IntegrationControls: dt must be positive");
  if (!(t_final >= dt)) throw std::invalid_argument("IntegrationControls: t_final must be >= dt");
  if (sample_every < 1) throw std::invalid_argument("IntegrationControls: sample_every must be >= 1");
}

long IntegrationControls::steps() const { return std::lround(t_final / dt); }

namespace {

std::vector<Operator<>> mode_lowering(ModeSpace space) {
  if (space.n_modes == 1) return {annihilation(space)};
  return {annihilation(space, 1), annihilation(space, 2)};
}

void require_match(const ModeSpace& a, const ModeSpace& b, const char* where) {
  if (!(a == b)) throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

}  // namespace

Operator<> hamiltonian(const ModelParams& params, ModeSpace space) {
  auto h = Operator<>::zero(space);
  for (const auto& a : mode_lowering(space)) {
    const auto ad = a.adjoint();
    h += cd(0.0, -params.pump) * (ad * ad - a * a);
  }
  return h;
}

MatrixXcd dissipator(double rate, const Operator<>& jump, const DensityMatrix<>& rho) {
  require_match(jump.space(), rho.space(), "dissipator");
  const MatrixXcd& l = jump.matrix();
  const MatrixXcd& r = rho.matrix();
  const MatrixXcd ldl = l.adjoint() * l;
  return (rate / 2.0) * (2.0 * l * r * l.adjoint() - ldl * r - r * ldl);
}

MatrixXcd squeezed_single_photon_dissipator(const ModelParams& params, const DensityMatrix<>& rho) {
  const double n = params.squeeze_n();
  const cd m = params.squeeze_m();
  const double g = params.gamma_s;
  const MatrixXcd& r = rho.matrix();
  MatrixXcd out = MatrixXcd::Zero(r.rows(), r.cols());
  for (const auto& a_op : mode_lowering(rho.space())) {
    const MatrixXcd& a = a_op.matrix();
    const MatrixXcd ad = a.adjoint();
    out += (1.0 + n) * dissipator(g, a_op, rho);
    out += n * dissipator(g, a_op.adjoint(), rho);
    out -= m * (g / 2.0) * (2.0 * a * r * a - (a * a) * r - r * (a * a));
    out -= std::conj(m) * (g / 2.0) * (2.0 * ad * r * ad - (ad * ad) * r - r * (ad * ad));
  }
  return out;
}

MatrixXcd liouvillian_rhs(const DensityMatrix<>& rho, const ModelParams& params) {
  params.validate();
  const ModeSpace space = rho.space();
  const MatrixXcd h = hamiltonian(params, space).matrix();
  const MatrixXcd& r = rho.matrix();
  MatrixXcd out = cd(0.0, -1.0) * (h * r - r * h);

  const auto lowering = mode_lowering(space);
  if (params.gamma_sq > 0) {
    out += squeezed_single_photon_dissipator(params, rho);
  } else {
    for (const auto& a : lowering) out += dissipator(params.gamma_s, a, rho);
  }
  for (const auto& a : lowering) out += dissipator(params.gamma_d, a * a, rho);
  if (space.n_modes == 2) out += dissipator(params.gamma_c, lowering[0] - lowering[1], rho);
  return out;
}

// -- Liouvillian ------------------------------------------------------------

std::array<std::vector<int>, 2> parity_sectors(ModeSpace space) {
  std::array<std::vector<int>, 2> sectors;
  for (int i = 0; i < space.dim(); ++i) {
    const int n = space.n_modes == 1 ? i : i / space.cutoff + i % space.cutoff;
    sectors[n % 2].push_back(i);
  }
  return sectors;
}

double parity_coherence(const MatrixXcd& rho, ModeSpace space) {
  const auto sectors = parity_sectors(space);
  double worst = 0.0;
  for (int i : sectors[0])
    for (int j : sectors[1]) worst = std::max({worst, std::abs(rho(i, j)), std::abs(rho(j, i))});
  return worst;
}

ParityBlocks split_parity(const MatrixXcd& rho, ModeSpace space) {
  const auto sectors = parity_sectors(space);
  ParityBlocks out;
  for (int s = 0; s < 2; ++s) out.block[s] = rho(sectors[s], sectors[s]);
  return out;
}

MatrixXcd merge_parity(const ParityBlocks& blocks, ModeSpace space) {
  const auto sectors = parity_sectors(space);
  MatrixXcd rho = MatrixXcd::Zero(space.dim(), space.dim());
  for (int s = 0; s < 2; ++s) rho(sectors[s], sectors[s]) = blocks.block[s];
  return rho;
}

namespace {

using Sparse = Liouvillian::Sparse;

Sparse to_sparse(const MatrixXcd& m) {
  Sparse s = m.sparseView(1.0, 1e-300);
  s.makeCompressed();
  return s;
}

// out += s * X * T, column by column.
void right_multiply_add(const MatrixXcd& x, const Sparse& t, cd s, MatrixXcd& out) {
  for (Eigen::Index j = 0; j < t.outerSize(); ++j) {
    for (Sparse::InnerIterator it(t, j); it; ++it) {
      out.col(j).noalias() += (s * it.value()) * x.col(it.row());
    }
  }
}

int operator_parity(const MatrixXcd& m, ModeSpace space) {
  const auto sectors = parity_sectors(space);
  const double even = std::max(m(sectors[0], sectors[0]).cwiseAbs().maxCoeff(),
                               m(sectors[1], sectors[1]).cwiseAbs().maxCoeff());
  const double odd = std::max(m(sectors[0], sectors[1]).cwiseAbs().maxCoeff(),
                              m(sectors[1], sectors[0]).cwiseAbs().maxCoeff());
  if (even > 0 && odd > 0) throw std::logic_error("Liouvillian: operator without definite parity");
  return odd > 0 ? 1 : 0;
}

}  // namespace

Liouvillian::Liouvillian(const ModelParams& params, ModeSpace space) : space_(space) {
  params.validate();
  const auto lowering = mode_lowering(space);
  const auto sectors = parity_sectors(space);
  const int d = space.dim();

  // d rho/dt = G rho + rho G^+ + sum_j coef_j A_j rho B_j
  MatrixXcd g = cd(0.0, -1.0) * hamiltonian(params, space).matrix();

  auto add_sandwich = [&](cd coef, const MatrixXcd& a, const MatrixXcd& b) {
    Sandwich s{coef, operator_parity(a, space), to_sparse(a.adjoint()), to_sparse(b), {}, {}};
    const MatrixXcd a_adj = a.adjoint();
    for (int target = 0; target < 2; ++target) {
      const auto& src = sectors[target ^ s.parity];
      s.a_adjoint_block[target] = to_sparse(a_adj(src, sectors[target]));
      s.b_block[target] = to_sparse(b(src, sectors[target]));
    }
    sandwiches_.push_back(std::move(s));
  };

  auto add_standard = [&](double rate, const MatrixXcd& l) {
    if (rate == 0.0) return;
    g -= 0.5 * rate * (l.adjoint() * l);
    // Z + Z^+ doubles the Hermitian sandwich.
    add_sandwich(rate / 2.0, l, l.adjoint());
  };

  const double n = params.squeeze_n();
  const cd m = params.squeeze_m();
  for (const auto& a_op : lowering) {
    const MatrixXcd& a = a_op.matrix();
    const MatrixXcd ad = a.adjoint();
    add_standard((1.0 + n) * params.gamma_s, a);
    add_standard(n * params.gamma_s, ad);
    if (params.gamma_s > 0 && std::abs(m) > 0) {
      g += 0.5 * params.gamma_s * (m * (a * a) + std::conj(m) * (ad * ad));
      // -M gamma_s a rho a; its adjoint supplies the M^* term.
      add_sandwich(-m * params.gamma_s, a, a);
    }
    add_standard(params.gamma_d, a * a);
  }
  if (space.n_modes == 2) add_standard(params.gamma_c, (lowering[0] - lowering[1]).matrix());

  const MatrixXcd g_adj = g.adjoint();
  if (operator_parity(g_adj, space) != 0) throw std::logic_error("Liouvillian: generator mixes parity");
  generator_adjoint_ = to_sparse(g_adj);
  for (int s = 0; s < 2; ++s) generator_adjoint_block_[s] = to_sparse(g_adj(sectors[s], sectors[s]));

  z_.resize(d, d);
  t1_.resize(d, d);
  t2_.resize(d, d);
}

void Liouvillian::apply(const MatrixXcd& rho, MatrixXcd& out) const {
  if (rho.rows() != space_.dim() || rho.cols() != space_.dim())
    throw std::invalid_argument("Liouvillian: dimension mismatch");
  const int d = space_.dim();
  z_.setZero(d, d);
  right_multiply_add(rho, generator_adjoint_, 1.0, z_);
  for (const auto& s : sandwiches_) {
    t1_.setZero(d, d);  // the block path may have resized it
    right_multiply_add(rho, s.a_adjoint, 1.0, t1_);  // rho A^+
    t2_ = t1_.adjoint();                             // A rho
    right_multiply_add(t2_, s.b, s.coef, z_);        // A rho B
  }
  out = z_ + z_.adjoint();
}

MatrixXcd Liouvillian::operator()(const MatrixXcd& rho) const {
  MatrixXcd out;
  apply(rho, out);
  return out;
}

void Liouvillian::apply(const ParityBlocks& rho, ParityBlocks& out) const {
  for (int s = 0; s < 2; ++s) {
    auto& z = zb_[s];
    z.setZero(rho.block[s].rows(), rho.block[s].cols());
    right_multiply_add(rho.block[s], generator_adjoint_block_[s], 1.0, z);
  }
  for (const auto& sw : sandwiches_) {
    for (int s = 0; s < 2; ++s) {
      const MatrixXcd& src = rho.block[s ^ sw.parity];
      t1_.setZero(src.rows(), rho.block[s].cols());
      right_multiply_add(src, sw.a_adjoint_block[s], 1.0, t1_);
      t2_ = t1_.adjoint();
      right_multiply_add(t2_, sw.b_block[s], sw.coef, zb_[s]);
    }
  }
  for (int s = 0; s < 2; ++s) out.block[s] = zb_[s] + zb_[s].adjoint();
}

// -- integration ------------------------------------------------------------

namespace {

void check_sample(const MatrixXcd& rho, double t, bool check_positivity, SampleDiagnostics& diag) {
  diag.time = t;
  diag.trace_error = rho.trace().real() - 1.0;
  diag.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (!(std::abs(diag.trace_error) <= kTraceAbortTol)) {
    std::ostringstream os;
    os << "trace drift " << diag.trace_error << " at t=" << t << " (dt too large or cutoff too small)";
    throw IntegrationError(os.str(), t);
  }
  if (!(diag.hermiticity_error <= kHermiticityAbortTol)) {
    std::ostringstream os;
    os << "Hermiticity residue " << diag.hermiticity_error << " at t=" << t;
    throw IntegrationError(os.str(), t);
  }
  if (check_positivity) {
    // rho + tol*I is positive definite iff min eigenvalue > -tol.
    const MatrixXcd shifted =
        rho + kPositivityAbortTol * MatrixXcd::Identity(rho.rows(), rho.cols());
    Eigen::LLT<MatrixXcd> llt(shifted);
    if (llt.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
      std::ostringstream os;
      os << "negative eigenvalue " << es.eigenvalues().minCoeff() << " at t=" << t
         << " (dt too large or cutoff too small)";
      throw IntegrationError(os.str(), t);
    }
  }
}

// Classical RK4 over a state type with per-part matrix storage.
template <typename State>
struct Rk4 {
  State k1, k2, k3, k4, stage;

  template <typename Rhs, typename ForEach>
  void step(State& rho, double dt, const Rhs& rhs, const ForEach& parts) {
    rhs(rho, k1);
    parts([&](auto& r, auto& a, auto&, auto&, auto&, auto& st) { st = r + (0.5 * dt) * a; });
    rhs(stage, k2);
    parts([&](auto& r, auto&, auto& b, auto&, auto&, auto& st) { st = r + (0.5 * dt) * b; });
    rhs(stage, k3);
    parts([&](auto& r, auto&, auto&, auto& c, auto&, auto& st) { st = r + dt * c; });
    rhs(stage, k4);
    parts([&](auto& r, auto& a, auto& b, auto& c, auto& e, auto& st) {
      r += (dt / 6.0) * (a + 2.0 * b + 2.0 * c + e);
      st = 0.5 * (r + r.adjoint());
      r.swap(st);
    });
  }
};

}  // namespace

EvolutionTrace integrate(const DensityMatrix<>& rho0, const ModelParams& params,
                         const IntegrationControls& controls, const Observer& observer,
                         const IntegrationOptions& options) {
  controls.validate();
  const Liouvillian rhs(params, rho0.space());
  const ModeSpace space = rho0.space();
  const long n_steps = controls.steps();
  const double dt = controls.dt;
  const bool blocked = parity_coherence(rho0.matrix(), space) == 0.0;

  EvolutionTrace trace;
  MatrixXcd full = rho0.matrix();
  ParityBlocks blocks;
  if (blocked) blocks = split_parity(full, space);

  auto sample = [&](long step) {
    const double t = static_cast<double>(step) * dt;
    if (blocked) full = merge_parity(blocks, space);
    SampleDiagnostics diag;
    check_sample(full, t, options.check_positivity, diag);
    trace.times.push_back(t);
    trace.diagnostics.push_back(diag);
    DensityMatrix<> state(space, full);
    const bool keep_going = observer ? observer(t, state) : true;
    if (options.keep_snapshots) trace.snapshots.push_back(std::move(state));
    return keep_going;
  };

  Rk4<MatrixXcd> rk_full;
  Rk4<ParityBlocks> rk_blocks;
  auto full_parts = [&](const auto& f) {
    f(full, rk_full.k1, rk_full.k2, rk_full.k3, rk_full.k4, rk_full.stage);
  };
  auto block_parts = [&](const auto& f) {
    for (int s = 0; s < 2; ++s)
      f(blocks.block[s], rk_blocks.k1.block[s], rk_blocks.k2.block[s], rk_blocks.k3.block[s],
        rk_blocks.k4.block[s], rk_blocks.stage.block[s]);
  };
  auto rhs_fn = [&](const auto& in, auto& out) { rhs.apply(in, out); };

  bool running = sample(0);
  long step = 0;
  while (running && step < n_steps) {
    if (blocked) {
      rk_blocks.step(blocks, dt, rhs_fn, block_parts);
    } else {
      rk_full.step(full, dt, rhs_fn, full_parts);
    }
    ++step;
    if (step % controls.sample_every == 0 || step == n_steps) running = sample(step);
  }
  if (blocked) full = merge_parity(blocks, space);
  trace.stopped_by_observer = !running;
  trace.final_state.emplace(space, full);
  return trace;
}

EvolutionTrace integrate_single_mode(const ModelParams& params, const IntegrationControls& controls,
                                     int cutoff, const Observer& observer,
                                     const IntegrationOptions& options) {
  return integrate(DensityMatrix<>::vacuum(ModeSpace::single(cutoff)), params, controls, observer,
                   options);
}

double spectral_radius_estimate(const Liouvillian& generator, int iterations) {
  if (iterations < 2) throw std::invalid_argument("spectral_radius_estimate: need at least 2 iterations");
  const int d = generator.space().dim();
  MatrixXcd x(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      const cd v(std::sin(1.0 + i + 0.7 * j), i == j ? 0.0 : std::cos(2.0 * i - j));
      x(i, j) = v;
      x(j, i) = std::conj(v);
    }
  x /= x.norm();
  MatrixXcd y(d, d);
  // Mean log growth over the second half; complex pairs make single ratios oscillate.
  double log_growth = 0.0;
  int counted = 0;
  for (int k = 0; k < iterations; ++k) {
    generator.apply(x, y);
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    if (k >= iterations / 2) {
      log_growth += std::log(n);
      ++counted;
    }
    x = y / n;
  }
  return std::exp(log_growth / counted);
}

IntegrationControls stable_controls(const IntegrationControls& controls, const ModelParams& params,
                                    ModeSpace space) {
  controls.validate();
  const double radius = spectral_radius_estimate(Liouvillian(params, space));
  if (controls.dt * radius <= kRk4StabilityMargin) return controls;
  const double interval = controls.dt * controls.sample_every;
  const auto per_sample = static_cast<int>(std::ceil(interval * radius / kRk4StabilityMargin));
  IntegrationControls out = controls;
  out.sample_every = per_sample;
  out.dt = interval / per_sample;
  return out;
}

}  // namespace dopocat
