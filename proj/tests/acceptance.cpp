// Acceptance suite: one PASS/FAIL line per primary criterion.
//
// Exit status is 0 once every criterion has been evaluated, whatever the
// verdicts; --strict makes any FAIL line a non-zero exit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "dopocat/fock.hpp"
#include "dopocat/sweep.hpp"
#include "support.hpp"

using namespace dopocat;
using cd = std::complex<double>;
namespace fs = std::filesystem;

namespace {

const double kSixRootTwo = 6.0 * std::numbers::sqrt2;

struct Verdict {
  int id;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

class Suite {
 public:
  Suite(fs::path out, std::set<int> only) : out_(std::move(out)), only_(std::move(only)) {
    fs::create_directories(out_);
  }

  void run(int id, const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
    if (!only_.empty() && !only_.contains(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    std::cerr << "[" << id << "] " << name << " ..." << std::endl;
    Verdict v{id, name};
    std::ostringstream detail;
    try {
      v.pass = body(detail);
    } catch (const std::exception& e) {
      v.pass = false;
      detail << " exception: " << e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail << " [" << fmt(sec, 4) << " s]";
    v.detail = detail.str();
    std::cerr << "[" << id << "] " << (v.pass ? "PASS" : "FAIL") << v.detail << std::endl;
    verdicts_.push_back(std::move(v));
  }

  [[nodiscard]] int report() const {
    auto sorted = verdicts_;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
    int failed = 0;
    std::ostringstream text;
    for (const auto& v : sorted) {
      text << (v.pass ? "PASS" : "FAIL") << " criterion " << v.id << " (" << v.name << "):" << v.detail << '\n';
      failed += v.pass ? 0 : 1;
    }
    text << sorted.size() - failed << "/" << sorted.size() << " criteria pass\n";
    std::cout << text.str();
    // ctest hides the output of passing tests; keep a copy next to the data.
    std::ofstream(out_ / "acceptance_report.txt") << text.str();
    return failed;
  }

  [[nodiscard]] const fs::path& out() const { return out_; }

 private:
  fs::path out_;
  std::set<int> only_;
  std::vector<Verdict> verdicts_;
};

ModelParams params(double s, double gs, double gc, double gsq = 0.0) {
  ModelParams p;
  p.pump = s;
  p.gamma_s = gs;
  p.gamma_c = gc;
  p.gamma_sq = gsq;
  return p;
}

RunConfig working_point(double gamma_s) {
  RunConfig c;
  c.tag = "working_point";
  c.cutoff = 16;
  c.params = params(1.0, gamma_s, 10.0);
  c.outputs.fidelity = true;
  return c;
}

RunConfig sweep_base() {
  RunConfig c;
  c.cutoff = 16;
  c.early_stop.enabled = true;
  return c;
}

void write_series(const fs::path& path, const std::vector<CriterionRecord>& series) {
  std::ofstream os(path);
  write_timeseries_csv(os, series);
}

// Extremes of the conservation diagnostics over one integration.
struct Conservation {
  double trace = 0, hermiticity = 0, min_eigenvalue = 1;
  int samples = 0;

  void add(const DensityMatrix<>& rho) {
    const auto& m = rho.matrix();
    trace = std::max(trace, std::abs(m.trace().real() - 1.0));
    hermiticity = std::max(hermiticity, (m - m.adjoint()).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    min_eigenvalue = std::min(min_eigenvalue, es.eigenvalues().minCoeff());
    ++samples;
  }
  [[nodiscard]] bool ok() const { return trace < 1e-6 && hermiticity < 1e-9 && min_eigenvalue >= -1e-6; }
};

// S values attaining the largest interpolated boundary height.
struct ProfileMax {
  double height = -1;
  std::vector<double> argmax;
  bool censored = false;
};

ProfileMax profile_max(const std::vector<ProfilePoint>& profile) {
  ProfileMax m;
  for (const auto& p : profile) {
    if (!p.y) continue;
    if (*p.y > m.height + 1e-12) {
      m.height = *p.y;
      m.argmax = {p.x};
      m.censored = p.censored;
    } else if (std::abs(*p.y - m.height) <= 1e-12) {
      m.argmax.push_back(p.x);
      m.censored = m.censored || p.censored;
    }
  }
  return m;
}

std::string list(const std::vector<double>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i], 4);
  return s + "}";
}

int failures(const SweepResult& r) {
  return static_cast<int>(std::count_if(r.points.begin(), r.points.end(),
                                        [](const PointResult& p) { return p.status == PointStatus::numerical_failure; }));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out_dir = "acceptance_out";
  bool strict = false;
  int workers = 0;
  std::vector<int> only;
  app.add_option("-o,--output-dir", out_dir, "Directory for CSV outputs")->capture_default_str();
  app.add_option("-j,--workers", workers, "Sweep worker threads (0: all cores)");
  app.add_flag("--strict", strict, "Exit non-zero when any criterion fails");
  app.add_option("--only", only, "Run only these criteria (later ones may need earlier results)");
  CLI11_PARSE(app, argc, argv);

  Suite suite(out_dir, {only.begin(), only.end()});
  const fs::path& out = suite.out();

  // Every sweep point and evaluated run; criterion 1 checks none aborted.
  int points_total = 0, points_aborted = 0;
  auto tally = [&](const SweepResult& r) {
    points_total += static_cast<int>(r.points.size());
    points_aborted += failures(r);
  };

  suite.run(2, "ideal single-mode cat", [&](std::ostringstream& d) {
    IntegrationControls c;
    c.t_final = 8.0;
    const auto trace = integrate_single_mode(params(1, 0, 0), c, 20);
    const auto target = cat_state(cd(0, std::numbers::sqrt2), +1, ModeSpace::single(20));
    const double f = fidelity_to_pure(*trace.final_state, target);
    d << " fidelity at t=8 " << fmt(f, 8) << " (need > 0.99)";
    return f > 0.99;
  });

  suite.run(3, "dark-state identity", [&](std::ostringstream& d) {
    // Cutoffs hold the Poisson tail of |alpha|^2 below 1e-24.
    bool ok = true;
    for (const auto [beta, cutoff] : {std::pair{1.0, 30}, std::pair{std::numbers::sqrt2, 40}, std::pair{3.0, 60}}) {
      const auto two = ModeSpace::two(cutoff);
      const auto cat = entangled_cat(cd(0, beta), CatParity::even, two);
      const double r = ((annihilation(two, 1) - annihilation(two, 2)).matrix() * cat.amplitudes()).norm();
      d << " |alpha|=" << fmt(beta, 4) << " cutoff " << cutoff << ": " << fmt(r, 3) << ";";
      ok = ok && r < 1e-12;
    }
    d << " (need < 1e-12)";
    return ok;
  });

  suite.run(4, "criterion calibration", [&](std::ostringstream& d) {
    const auto two = ModeSpace::two(45);
    const auto grid = QuadratureGrid::for_amplitude(3.0);
    const auto scales = ModularScales::from_lp(kSixRootTwo);
    auto at = [&](const DensityMatrix<>& rho, VariableSet vars) {
      return evaluate_criterion(joint_position_distribution(rho, grid), joint_momentum_distribution(rho, grid), scales,
                                vars);
    };
    const auto even = at(DensityMatrix<>::pure(entangled_cat(cd(0, 3), CatParity::even, two)), VariableSet::even_parity);
    const auto odd = at(DensityMatrix<>::pure(entangled_cat(cd(0, 3), CatParity::odd, two)), VariableSet::odd_parity);
    const auto mixture_rho = classical_mixture(cd(0, 3), two);
    const auto mix = at(mixture_rho, VariableSet::even_parity);
    const auto mix_best = optimize_lp(joint_position_distribution(mixture_rho, grid),
                                      joint_momentum_distribution(mixture_rho, grid), default_lp_grid(),
                                      VariableSet::even_parity);
    const bool ok_even = even.c_mec >= 0.112 && even.c_mec <= 0.122;
    const bool ok_odd = odd.c_mec >= 0.112 && odd.c_mec <= 0.122;
    const bool ok_var = mix.var_modular >= 0.162 && mix.var_modular <= 0.172;
    const bool ok_mix = mix.c_mec >= kEntanglementThreshold && mix_best.c_mec >= kEntanglementThreshold;
    d << " even cat C=" << fmt(even.c_mec) << ", odd cat (odd variables) C=" << fmt(odd.c_mec)
      << " (need [0.112, 0.122]); mixture var=" << fmt(mix.var_modular) << " (need [0.162, 0.172]), C="
      << fmt(mix.c_mec) << ", min over l_p in [2, 6] C=" << fmt(mix_best.c_mec) << " (need >= 0.1565)";
    return ok_even && ok_odd && ok_var && ok_mix;
  });

  PointResult ideal, lossy;
  suite.run(5, "working-point time series", [&](std::ostringstream& d) {
    ideal = evaluate_point(working_point(0.0));
    lossy = evaluate_point(working_point(0.05));
    write_series(out / "working_point_gamma_s_0__timeseries.csv", ideal.series);
    write_series(out / "working_point_gamma_s_0.05__timeseries.csv", lossy.series);
    if (ideal.series.empty() || lossy.series.empty()) throw std::runtime_error("integration failed");

    const auto& end_ideal = ideal.series.back();
    const bool a = std::abs(end_ideal.c_mec - 0.1167) <= 0.01 && std::abs(end_ideal.l_p - 4.0) <= 0.05;
    bool rises = false;
    for (const auto& r : lossy.series)
      if (r.time > lossy.argmin_time && r.c_mec > kEntanglementThreshold) rises = true;
    const bool b = lossy.c_mec_min < kEntanglementThreshold && rises;
    const auto& end_lossy = lossy.series.back();
    const bool c = std::abs(end_lossy.var_modular - 0.167) <= 0.015;
    d << " (a) " << (a ? "pass" : "FAIL") << ": gamma_s=0, t=" << fmt(end_ideal.time, 3) << " C=" << fmt(end_ideal.c_mec)
      << " at l_p=" << fmt(end_ideal.l_p, 4) << " (need |C-0.1167|<=0.01, |l_p-4|<=0.05);"
      << " (b) " << (b ? "pass" : "FAIL") << ": gamma_s=0.05 C_min=" << fmt(lossy.c_mec_min) << " at t="
      << fmt(lossy.argmin_time, 3) << ", later rise above 0.1565: " << (rises ? "yes" : "no") << ";"
      << " (c) " << (c ? "pass" : "FAIL") << ": var at t=" << fmt(end_lossy.time, 3) << " = "
      << fmt(end_lossy.var_modular) << " (need |var-0.167|<=0.015)";
    return a && b && c;
  });

  suite.run(6, "single-mode uncertainty bound", [&](std::ostringstream& d) {
    std::mt19937_64 rng(20240611);
    double worst = 1e300;
    int checked = 0;
    for (int k = 0; k < 20; ++k) {
      const auto rho = testing::random_density(ModeSpace::single(14), 4 + k % 7, 1 + k % 4, rng);
      for (const double lp : {2.0, 4.0, 6.0}) {
        worst = std::min(worst, modular_uncertainty(rho, ModularScales::from_lp(lp)).sum());
        ++checked;
      }
    }
    d << " " << checked << " (state, l_p) pairs, smallest sum " << fmt(worst) << " (need >= 0.078)";
    return worst >= 0.078;
  });

  suite.run(10, "numerical robustness", [&](std::ostringstream& d) {
    if (lossy.series.empty()) throw std::runtime_error("criterion 5 working point unavailable");
    RunConfig wide = working_point(0.05);
    wide.cutoff = 24;
    const double c24 = evaluate_point(wide).c_mec_min;
    RunConfig fine = working_point(0.05);
    fine.controls.dt /= 2;
    fine.controls.sample_every *= 2;
    fine.auto_step = false;
    const double c_half = evaluate_point(fine).c_mec_min;
    const double cutoff_change = std::abs(c24 - lossy.c_mec_min);
    const double dt_change = std::abs(c_half - lossy.c_mec_min);

    // Order from errors at dt, dt/2, dt/4 against a dt/32 reference.
    const auto two = ModeSpace::two(6);
    const auto p = params(1.0, 0.05, 2.0);
    auto final_at = [&](double dt) {
      IntegrationControls c;
      c.dt = dt;
      c.t_final = 0.4;
      c.sample_every = 1 << 30;
      return integrate(DensityMatrix<>::vacuum(two), p, c).final_state->matrix();
    };
    const Eigen::MatrixXcd ref = final_at(1.25e-4);
    const double e1 = (final_at(4e-3) - ref).norm();
    const double e2 = (final_at(2e-3) - ref).norm();
    const double e3 = (final_at(1e-3) - ref).norm();
    const double p1 = std::log2(e1 / e2), p2 = std::log2(e2 / e3);
    const bool order = std::abs(p1 - 4.0) <= 0.5 && std::abs(p2 - 4.0) <= 0.5;
    d << " cutoff 16->24 change " << fmt(cutoff_change, 3) << " (need < 1e-3); dt halving change "
      << fmt(dt_change, 3) << " (dt " << fmt(lossy.dt_used, 3) << " vs " << fmt(fine.controls.dt, 3)
      << ", need < 1e-4); RK4 observed orders " << fmt(p1, 4) << ", " << fmt(p2, 4)
      << " (need 4 +- 0.5)";
    return cutoff_change < 1e-3 && dt_change < 1e-4 && order;
  });

  // Shared (S, gamma_s) grids at gamma_c = 5 and 10.
  const AxisSpec pump_axis{SweepAxis::pump, 0.8, 1.6, 9};
  const AxisSpec loss_axis{SweepAxis::gamma_s, 0.0, 0.15, 9};
  std::vector<SweepResult> plain;
  std::vector<ProfilePoint> profile10;
  suite.run(7, "collective-loss sweeps", [&](std::ostringstream& d) {
    for (const double gc : {5.0, 10.0}) {
      SweepConfig s;
      s.tag = gc == 5.0 ? "loss_gc5" : "loss_gc10";
      s.axis1 = pump_axis;
      s.axis2 = loss_axis;
      s.base = sweep_base();
      s.base.params.gamma_c = gc;
      s.workers = workers;
      plain.push_back(run_sweep(s));
      tally(plain.back());
      write_sweep_outputs(plain.back(), s.tag, out);
    }
    const int n5 = plain[0].count_below(), n10 = plain[1].count_below();
    const bool more = n10 > n5;

    bool located = true;
    for (int k = 0; k < 2; ++k) {
      const auto prof = boundary_profile(plain[k].c_mec_grid(), plain[k].values1, plain[k].values2);
      if (k == 1) profile10 = prof;
      const ProfileMax m = profile_max(prof);
      bool near = !m.argmax.empty();
      for (double s : m.argmax) near = near && std::abs(s - 1.05) <= 0.1 + 1e-9;
      located = located && near;
      d << " gamma_c=" << (k ? 10 : 5) << ": boundary max gamma_s=" << fmt(m.height, 4)
        << (m.censored ? " (censored)" : "") << " at S=" << list(m.argmax) << ";";
    }

    SweepConfig g;
    g.tag = "loss_gamma_c";
    g.axis1 = {SweepAxis::gamma_c, 2.0, 20.0, 10};
    g.axis2 = loss_axis;
    g.base = sweep_base();
    g.base.params.pump = 1.05;
    g.workers = workers;
    const SweepResult gs = run_sweep(g);
    tally(gs);
    write_sweep_outputs(gs, g.tag, out);
    const auto prof = boundary_profile(gs.c_mec_grid(), gs.values1, gs.values2);
    auto height = [&](double gc) -> std::optional<double> {
      for (const auto& p : prof)
        if (std::abs(p.x - gc) < 1e-9 && p.y && !p.censored) return p.y;
      return std::nullopt;
    };
    const auto b2 = height(2.0), b10 = height(10.0), b20 = height(20.0);
    bool saturates = false;
    d << " S=1.05 boundary gamma_s(gamma_c):";
    for (const auto& p : prof) d << " " << fmt(p.x, 3) << "->" << (p.y ? fmt(*p.y, 4) : "none") << (p.censored ? "+" : "");
    if (b2 && b10 && b20) {
      const double early = *b10 - *b2, late = *b20 - *b10;
      saturates = late < 0.5 * early;
      d << "; gain 2->10 " << fmt(early, 4) << ", 10->20 " << fmt(late, 4) << " (need late < half early)";
    } else {
      d << "; boundary undefined or censored at gamma_c in {2, 10, 20}";
    }
    const bool clean = failures(plain[0]) + failures(plain[1]) + failures(gs) == 0;
    d << "; counts below threshold " << n5 << " (gamma_c=5) vs " << n10 << " (gamma_c=10), need strictly more"
      << (clean ? "" : "; aborted points present");
    return more && located && saturates && clean;
  });

  suite.run(8, "squeezed-reservoir sweeps", [&](std::ostringstream& d) {
    if (plain.size() != 2) throw std::runtime_error("criterion 7 grids unavailable");
    SqueezedSuiteConfig q;
    q.tag = "squeezed";
    q.output_dir = out;
    q.base = sweep_base();
    q.gamma_sq = 1.0;
    q.gamma_c_values = {5.0, 10.0};
    q.pump_axis = pump_axis;
    q.loss_axis = loss_axis;
    q.squeeze_axis = {SweepAxis::gamma_sq, 0.0, 1.6, 9};
    q.squeeze_loss_axis = {SweepAxis::gamma_s, 0.0, 0.24, 9};
    q.squeeze_sweep_pump = 1.2;
    q.squeeze_sweep_gamma_c = 10.0;
    q.workers = workers;
    const SqueezedSuiteResult r = run_squeezed_suite(q);
    write_squeezed_outputs(r, q);
    for (const auto& s : r.pump_sweeps) tally(s);
    tally(r.squeeze_sweep);

    bool larger = true;
    for (int k = 0; k < 2; ++k) {
      const int plain_n = plain[k].count_below(), sq_n = r.pump_sweeps[k].count_below();
      larger = larger && sq_n > plain_n;
      d << " gamma_c=" << (k ? 10 : 5) << ": " << sq_n << " cells below threshold with gamma_sq=1 vs " << plain_n
        << " without;";
    }
    const auto prof = boundary_profile(r.squeeze_sweep.c_mec_grid(), r.squeeze_sweep.values1, r.squeeze_sweep.values2);
    const ProfileMax m = profile_max(prof);
    bool near = !m.argmax.empty();
    for (double g : m.argmax) near = near && std::abs(g - 0.5) <= 0.2 + 1e-9;
    d << " (gamma_sq, gamma_s) at S=1.2, gamma_c=10: boundary max gamma_s=" << fmt(m.height, 4)
      << (m.censored ? " (censored)" : "") << " at gamma_sq=" << list(m.argmax) << " (need within 0.2 of 0.5)";
    int aborted = failures(r.squeeze_sweep);
    for (const auto& s : r.pump_sweeps) aborted += failures(s);
    if (aborted) d << "; aborted points present";
    return larger && near && aborted == 0;
  });

  suite.run(9, "phase-space diagnostics", [&](std::ostringstream& d) {
    const auto two = ModeSpace::two(20);
    const cd alpha(0, std::numbers::sqrt2);
    const auto even = DensityMatrix<>::pure(entangled_cat(alpha, CatParity::even, two));
    const auto grid = SectionGrid::for_amplitude(std::numbers::sqrt2);
    const auto section = wigner_section(even, WignerPlane::imaginary, grid);
    {
      std::ofstream os(out / "even_cat__wigner_imag.csv");
      write_csv(os, section);
    }
    const auto& w = section.values;
    const double floor = 0.1 * w.maxCoeff();
    int lobes = 0;
    for (int i = 1; i + 1 < w.rows(); ++i)
      for (int j = 1; j + 1 < w.cols(); ++j) {
        bool peak = w(i, j) > floor;
        for (int di = -1; di <= 1 && peak; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            if ((di || dj) && w(i + di, j + dj) > w(i, j)) peak = false;
        if (peak && std::hypot(grid.coordinate(i), grid.coordinate(j)) > 0.5) ++lobes;
      }
    const int c = grid.points() / 2;
    const double centre_even = w(c, c);
    const double centre_odd = wigner_point(DensityMatrix<>::pure(entangled_cat(alpha, CatParity::odd, two)), {}, {});
    const bool ok_even = lobes == 2 && centre_even >= 0.0;
    const bool ok_odd = centre_odd < 0.0;
    d << " even cat: " << lobes << " off-centre lobes, centre " << fmt(centre_even) << "; odd cat centre "
      << fmt(centre_odd) << " (need < 0);";

    bool low = true;
    if (profile10.empty()) throw std::runtime_error("criterion 7 boundary unavailable");
    std::vector<ProfilePoint> inside;
    for (const auto& p : profile10)
      if (p.y && !p.censored) inside.push_back(p);
    if (inside.size() < 3) throw std::runtime_error("fewer than 3 boundary points at gamma_c=10");
    IntegrationControls ctl;
    ctl.t_final = 8.0;
    for (const std::size_t k : {std::size_t{0}, inside.size() / 2, inside.size() - 1}) {
      const auto f = max_cat_fidelity_single_mode(params(inside[k].x, *inside[k].y, 0.0), ctl, 20);
      low = low && f.max < 0.9;
      d << " boundary S=" << fmt(inside[k].x, 3) << ", gamma_s=" << fmt(*inside[k].y, 4) << ": max fidelity "
        << fmt(f.max, 4) << ";";
    }
    d << " (need < 0.9)";
    return ok_even && ok_odd && low;
  });

  suite.run(1, "conservation", [&](std::ostringstream& d) {
    struct Case {
      std::string name;
      ModelParams p;
      int modes;
      int cutoff;
    };
    const std::vector<Case> cases{
        {"working point", params(1.0, 0.05, 10.0), 2, 16},
        {"stiff corner", params(1.6, 0.15, 20.0), 2, 16},
        {"squeezed corner", params(1.6, 0.15, 10.0, 1.6), 2, 16},
        {"single mode", params(1.0, 0.0, 0.0), 1, 20},
    };
    bool ok = true;
    for (const auto& c : cases) {
      const ModeSpace space = c.modes == 1 ? ModeSpace::single(c.cutoff) : ModeSpace::two(c.cutoff);
      const IntegrationControls ctl = stable_controls(IntegrationControls{}, c.p, space);
      Conservation m;
      auto observe = [&](double, const DensityMatrix<>& rho) {
        m.add(rho);
        return true;
      };
      if (c.modes == 1) integrate_single_mode(c.p, ctl, c.cutoff, observe);
      else integrate(DensityMatrix<>::vacuum(space), c.p, ctl, observe);
      ok = ok && m.ok();
      d << " " << c.name << ": " << m.samples << " samples, max |Tr-1| " << fmt(m.trace, 3) << ", max Herm "
        << fmt(m.hermiticity, 3) << ", min eig " << fmt(m.min_eigenvalue, 3) << ";";
    }
    // Sweep integrations check the same bounds at every sample and abort on a
    // violation, so a clean sweep point certifies them.
    d << " sweep points " << points_total << ", aborted " << points_aborted;
    return ok && points_aborted == 0;
  });

  const int failed = suite.report();
  return strict && failed ? 1 : 0;
}
