#include <cmath>
#include <numbers>

#include <doctest.h>

#include "dopocat/analysis.hpp"
#include "dopocat/fock.hpp"
#include "dopocat/lindblad.hpp"
#include "support.hpp"

using namespace dopocat;
using cd = std::complex<double>;
using Eigen::MatrixXcd;

namespace {

ModelParams rates(double s, double gs, double gc, double gsq = 0.0) {
  ModelParams p;
  p.pump = s;
  p.gamma_s = gs;
  p.gamma_c = gc;
  p.gamma_sq = gsq;
  return p;
}

IntegrationControls horizon(double dt, double t_final, int sample_every = 1 << 30) {
  IntegrationControls c;
  c.dt = dt;
  c.t_final = t_final;
  c.sample_every = sample_every;
  return c;
}

MatrixXcd final_matrix(const DensityMatrix<>& rho0, const ModelParams& p, const IntegrationControls& c) {
  return integrate(rho0, p, c).final_state->matrix();
}

// (G/2)(2 A rho B - B A rho - rho B A), the generic two-sided term.
MatrixXcd sandwich(double g, const MatrixXcd& a, const MatrixXcd& b, const MatrixXcd& rho) {
  return g / 2 * (2.0 * a * rho * b - b * a * rho - rho * b * a);
}

}  // namespace

TEST_SUITE("lindblad") {
  TEST_CASE("hamiltonian") {
    const auto s4 = ModeSpace::single(4);
    CHECK(hamiltonian(rates(0, 0, 0), s4).matrix().norm() == 0.0);
    const auto h = hamiltonian(rates(1, 0, 0), s4).matrix();
    CHECK(std::abs(h(2, 0) - cd(0.0, -std::numbers::sqrt2)) < 1e-15);
    CHECK((h - h.adjoint()).norm() < 1e-12);
    const auto h2 = hamiltonian(rates(1.3, 0, 0), ModeSpace::two(5)).matrix();
    CHECK((h2 - h2.adjoint()).norm() < 1e-12);
  }

  TEST_CASE("dissipator examples") {
    const auto s = ModeSpace::single(4);
    const auto a = annihilation(s);
    CHECK(dissipator(1.0, a, DensityMatrix<>::vacuum(s)).norm() == 0.0);

    MatrixXcd one = MatrixXcd::Zero(4, 4);
    one(1, 1) = 1;
    MatrixXcd expected = MatrixXcd::Zero(4, 4);
    expected(0, 0) = 1;
    expected(1, 1) = -1;
    CHECK((dissipator(1.0, a, DensityMatrix<>(s, one)) - expected).norm() < 1e-15);

    std::mt19937_64 rng(3);
    const auto rho = testing::random_density(ModeSpace::single(8), 8, 4, rng);
    const auto a8 = annihilation(ModeSpace::single(8));
    CHECK(std::abs(dissipator(0.7, a8, rho).trace()) < 1e-12);
    CHECK(std::abs(dissipator(1.0, a8 * a8, rho).trace()) < 1e-12);
    CHECK_THROWS_AS(dissipator(1.0, a, rho), std::invalid_argument);
  }

  TEST_CASE("squeezed bath constants") {
    ModelParams p = rates(1, 0.1, 0, 0.5);
    CHECK(p.squeeze_n() == doctest::Approx(0.27154).epsilon(1e-5));
    CHECK(p.squeeze_m().real() == doctest::Approx(-0.58760).epsilon(1e-5));
    CHECK(std::abs(p.squeeze_m().imag()) < 1e-15);
    p.gamma_sq = 0;
    CHECK(p.squeeze_n() == 0.0);
    CHECK(std::abs(p.squeeze_m()) == 0.0);
  }

  TEST_CASE("squeezed dissipator reduces to plain loss and stays traceless") {
    std::mt19937_64 rng(17);
    const auto two = ModeSpace::two(6);
    const auto rho = testing::random_density(two, 6, 3, rng);
    const ModelParams p = rates(1, 0.3, 0, 0);
    const MatrixXcd plain = dissipator(0.3, annihilation(two, 1), rho) + dissipator(0.3, annihilation(two, 2), rho);
    CHECK((squeezed_single_photon_dissipator(p, rho) - plain).cwiseAbs().maxCoeff() < 1e-14);
    const ModelParams q = rates(1, 0.3, 0, 0.8);
    CHECK(std::abs(squeezed_single_photon_dissipator(q, rho).trace()) < 1e-12);
    const MatrixXcd out = squeezed_single_photon_dissipator(q, rho);
    CHECK((out - out.adjoint()).norm() < 1e-12);
  }

  TEST_CASE("squeezed dissipator derivative in gamma_sq") {
    std::mt19937_64 rng(23);
    const auto two = ModeSpace::two(5);
    const auto rho = testing::random_density(two, 5, 2, rng);
    const double g = 0.4, x = 0.6, h = 1e-4;
    const auto at = [&](double gsq) { return squeezed_single_photon_dissipator(rates(1, g, 0, gsq), rho); };
    const MatrixXcd numeric = (at(x + h) - at(x - h)) / (2 * h);

    // dN = sinh(2x), dM = cosh(2x) e^{-i pi}; the bracketed terms are linear in N, M.
    const double dn = std::sinh(2 * x);
    const cd dm = std::cosh(2 * x) * std::exp(cd(0.0, -std::numbers::pi));
    MatrixXcd analytic = MatrixXcd::Zero(two.dim(), two.dim());
    for (int k = 1; k <= 2; ++k) {
      const MatrixXcd a = annihilation(two, k).matrix();
      const MatrixXcd ad = a.adjoint();
      analytic += dn * (sandwich(g, a, ad, rho.matrix()) + sandwich(g, ad, a, rho.matrix()));
      analytic -= dm * sandwich(g, a, a, rho.matrix());
      analytic -= std::conj(dm) * sandwich(g, ad, ad, rho.matrix());
    }
    CHECK((numeric - analytic).cwiseAbs().maxCoeff() < 1e-6);
    // Continuity at zero.
    CHECK((at(1e-7) - at(0.0)).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("dense right-hand side") {
    std::mt19937_64 rng(29);
    const auto two = ModeSpace::two(6);
    const auto rho = testing::random_density(two, 6, 3, rng);
    const MatrixXcd out = liouvillian_rhs(rho, rates(1.1, 0.2, 3.0, 0.4));
    CHECK(std::abs(out.trace()) < 1e-11);
    CHECK((out - out.adjoint()).norm() < 1e-11);

    // gamma_s > 0 moves the even cat.
    const auto cat = DensityMatrix<>::pure(entangled_cat(cd(0, std::numbers::sqrt2), CatParity::even, ModeSpace::two(16)));
    CHECK(liouvillian_rhs(cat, rates(1, 0.05, 10)).norm() > 1e-2);

    // Collective loss alone annihilates the even cat, once the cutoff holds
    // the Poisson tail below machine precision.
    const auto wide = DensityMatrix<>::pure(entangled_cat(cd(0, std::numbers::sqrt2), CatParity::even, ModeSpace::two(34)));
    const auto l = annihilation(wide.space(), 1) - annihilation(wide.space(), 2);
    CHECK(dissipator(10.0, l, wide).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("ideal cat residual shrinks with the cutoff") {
    double previous = 1e300;
    for (const int cutoff : {10, 12, 14, 16, 18}) {
      const auto cat = DensityMatrix<>::pure(entangled_cat(cd(0, std::numbers::sqrt2), CatParity::even, ModeSpace::two(cutoff)));
      const double r = liouvillian_rhs(cat, rates(1, 0, 10)).norm();
      CHECK(r < previous);
      previous = r;
    }
    CHECK(previous < 1e-3);
  }

  TEST_CASE("fast generator matches the dense form") {
    std::mt19937_64 rng(31);
    for (const auto& space : {ModeSpace::single(9), ModeSpace::two(6)}) {
      for (const auto& p : {rates(1.0, 0.05, 10.0), rates(1.2, 0.1, 5.0, 1.0), rates(0.0, 0.0, 0.0)}) {
        const auto rho = testing::random_density(space, space.cutoff, 3, rng);
        const Liouvillian fast(p, space);
        const MatrixXcd dense = liouvillian_rhs(rho, p);
        CHECK((fast(rho.matrix()) - dense).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + dense.cwiseAbs().maxCoeff()));

        // Parity-block route on the block-diagonal part.
        const ParityBlocks blocks = split_parity(rho.matrix(), space);
        const MatrixXcd diag = merge_parity(blocks, space);
        ParityBlocks out;
        fast.apply(blocks, out);
        CHECK((merge_parity(out, space) - fast(diag)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(parity_coherence(diag, space) == 0.0);
      }
    }
  }

  TEST_CASE("frozen dynamics") {
    const auto two = ModeSpace::two(5);
    const auto trace = integrate(DensityMatrix<>::vacuum(two), rates(0, 0, 0), horizon(2e-3, 1.0, 50));
    CHECK((trace.final_state->matrix() - DensityMatrix<>::vacuum(two).matrix()).norm() == 0.0);
    CHECK(trace.times.size() == 11);
    for (std::size_t k = 1; k < trace.times.size(); ++k) CHECK(trace.times[k] > trace.times[k - 1]);
  }

  TEST_CASE("samples, diagnostics and observer stop") {
    const auto two = ModeSpace::two(6);
    int calls = 0;
    const auto trace = integrate(
        DensityMatrix<>::vacuum(two), rates(1, 0.05, 2), horizon(2e-3, 1.0, 25),
        [&](double, const DensityMatrix<>&) { return ++calls < 4; }, {.keep_snapshots = true});
    CHECK(calls == 4);
    CHECK(trace.stopped_by_observer);
    CHECK(trace.snapshots.size() == 4);
    CHECK(trace.times.back() == doctest::Approx(0.15));
    for (const auto& d : trace.diagnostics) {
      CHECK(std::abs(d.trace_error) < 1e-6);
      CHECK(d.hermiticity_error < 1e-9);
    }
  }

  TEST_CASE("step halving at the default step") {
    const auto two = ModeSpace::two(8);
    const auto p = rates(1, 0.05, 2);
    const auto rho0 = DensityMatrix<>::vacuum(two);
    const MatrixXcd a = final_matrix(rho0, p, horizon(2e-3, 1.0));
    const MatrixXcd b = final_matrix(rho0, p, horizon(1e-3, 1.0));
    CHECK((a - b).norm() < 1e-6);
  }

  TEST_CASE("fourth-order convergence") {
    const auto two = ModeSpace::two(8);
    const auto p = rates(1, 0.05, 2);
    const auto rho0 = DensityMatrix<>::vacuum(two);
    const MatrixXcd ref = final_matrix(rho0, p, horizon(1.25e-4, 0.4));
    const double e4 = (final_matrix(rho0, p, horizon(4e-3, 0.4)) - ref).norm();
    const double e2 = (final_matrix(rho0, p, horizon(2e-3, 0.4)) - ref).norm();
    const double e1 = (final_matrix(rho0, p, horizon(1e-3, 0.4)) - ref).norm();
    CHECK(e4 / e2 >= 8.0);
    CHECK(e4 / e2 <= 32.0);
    CHECK(e2 / e1 >= 8.0);
    CHECK(e2 / e1 <= 32.0);
  }

  TEST_CASE("unstable step aborts; stable controls fix it") {
    const auto two = ModeSpace::two(16);
    const auto p = rates(1.6, 0.05, 20);
    CHECK_THROWS_AS(integrate(DensityMatrix<>::vacuum(two), p, horizon(4e-3, 1.0, 25)), IntegrationError);

    const auto c = stable_controls(horizon(4e-3, 1.0, 25), p, two);
    const double radius = spectral_radius_estimate(Liouvillian(p, two));
    CHECK(c.dt * radius <= kRk4StabilityMargin + 1e-12);
    CHECK(c.dt * c.sample_every == doctest::Approx(0.1));
    CHECK_NOTHROW(integrate(DensityMatrix<>::vacuum(two), p, horizon(c.dt, 0.3, c.sample_every)));

    // The default step is kept where it is already stable.
    const auto working = stable_controls(IntegrationControls{}, rates(1, 0.05, 10), two);
    CHECK(working.dt == 2e-3);
    CHECK(working.sample_every == IntegrationControls{}.sample_every);
  }

  TEST_CASE("validation") {
    CHECK_THROWS_AS(rates(1, -0.1, 0).validate(), std::invalid_argument);
    ModelParams p;
    p.gamma_d = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_THROWS_AS(horizon(0, 1).validate(), std::invalid_argument);
    CHECK_THROWS_AS(horizon(1e-2, 1e-3).validate(), std::invalid_argument);
    CHECK_THROWS_AS(horizon(1e-3, 1, 0).validate(), std::invalid_argument);
  }

  TEST_CASE("single oscillator") {
    // Two-photon drive and loss only: the even cat with alpha = i sqrt2.
    IntegrationControls c = horizon(2e-3, 8.0, 100);
    const auto trace = integrate_single_mode(rates(1, 0, 0), c, 20);
    const auto target = cat_state(cd(0, std::numbers::sqrt2), +1, ModeSpace::single(20));
    CHECK(fidelity_to_pure(*trace.final_state, target) > 0.99);

    // Loss-dominated limit approaches the vacuum; the excited population
    // falls like (S / gamma_s)^2.
    auto excited = [&](double gs) {
      return 1.0 - integrate_single_mode(rates(1, gs, 0), horizon(1e-3, 2.0), 8).final_state->matrix()(0, 0).real();
    };
    const double e20 = excited(20), e80 = excited(80);
    CHECK(e20 < 0.02);
    CHECK(e80 / e20 == doctest::Approx(1.0 / 16).epsilon(0.3));
  }
}
