#include "dopocat/modular.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include "dopocat/log.hpp"

namespace dopocat {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ModularScales ModularScales::from_lp(double l_p) {
  if (!(l_p > 0)) throw std::invalid_argument("ModularScales: l_p must be positive");
  return {2.0 * std::numbers::pi / l_p, l_p};
}

void ModularScales::validate() const {
  if (!(l_x > 0) || !(l_p > 0)) throw std::invalid_argument("ModularScales: periods must be positive");
  if (std::abs(l_x * l_p - 2.0 * std::numbers::pi) > 1e-12)
    throw std::invalid_argument("ModularScales: l_x * l_p must equal 2 pi");
}

ModularPart modular_decompose(double value, double period) {
  if (!(period > 0)) throw std::invalid_argument("modular_decompose: period must be positive");
  auto n = static_cast<std::int64_t>(std::floor(value / period));
  double rest = value - static_cast<double>(n) * period;
  if (rest >= period) {
    ++n;
    rest -= period;
  }
  return {n, std::max(rest, 0.0)};
}

namespace {

// Per-point weights for the moments of the modular and integer parts: the
// density is interpolated by cubic Lagrange polynomials through four
// neighbouring grid points, and each basis function is integrated exactly
// against rest, rest^2, N and N^2 (three-point Gauss on every piece between
// grid points and period boundaries). The half cells outside the outermost
// points are dropped; densities vanish there.
struct MomentTables {
  VectorXd rest, rest2, n, n2;
};

MomentTables moment_tables(const QuadratureGrid& grid, double period, double scale) {
  const int np = grid.points();
  MomentTables t{VectorXd::Zero(np), VectorXd::Zero(np), VectorXd::Zero(np), VectorXd::Zero(np)};
  const double h = grid.step;
  static const std::array<double, 3> gx{-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const std::array<double, 3> gw{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  auto piece = [&](int j, double a, double b) {
    if (!(b > a)) return;
    const double m = (a + b) / 2.0;
    const double n = std::floor(m / period);
    for (int k = 0; k < 3; ++k) {
      const double x = m + gx[k] * (b - a) / 2.0;
      const double w = gw[k] * (b - a) / 2.0 / h;
      const double s = (x - grid.coordinate(j)) / h;
      const std::array<double, 4> basis{-s * (s - 1) * (s - 2) / 6.0, (s + 1) * (s - 1) * (s - 2) / 2.0,
                                        -(s + 1) * s * (s - 2) / 2.0, (s + 1) * s * (s - 1) / 6.0};
      const double r = (x - n * period) / scale;
      for (int q = 0; q < 4; ++q) {
        const int i = j - 1 + q;
        if (i < 0 || i >= np) continue;
        const double wb = w * basis[q];
        t.rest(i) += wb * r;
        t.rest2(i) += wb * r * r;
        t.n(i) += wb * n;
        t.n2(i) += wb * n * n;
      }
    }
  };
  for (int j = 0; j + 1 < np; ++j) {
    const double lo = grid.coordinate(j);
    const double hi = grid.coordinate(j + 1);
    double a = lo;
    for (double n = std::floor(lo / period) + 1.0; n * period < hi; n += 1.0) {
      piece(j, a, n * period);
      a = n * period;
    }
    piece(j, a, hi);
  }
  return t;
}

// Fractions of cell [a, b] falling in each integer cell of `period`.
std::vector<std::pair<std::int64_t, double>> integer_fractions(double a, double b, double period) {
  std::vector<std::pair<std::int64_t, double>> out;
  const double width = b - a;
  auto n = static_cast<std::int64_t>(std::floor(a / period));
  while (a < b) {
    const double edge = std::min(b, static_cast<double>(n + 1) * period);
    if (edge > a) {
      out.emplace_back(n, (edge - a) / width);
      a = edge;
    }
    ++n;
  }
  return out;
}

MatrixXd normalized_weights(const JointDistribution& d) {
  const double total = d.values.sum();
  if (!(total > 0)) throw std::domain_error("modular criterion: empty distribution");
  return d.values / total;
}

void require_pair(const JointDistribution& px, const JointDistribution& pp) {
  if (px.kind != QuadratureKind::position || pp.kind != QuadratureKind::momentum)
    throw std::invalid_argument("modular criterion: expected (position, momentum) distributions");
}

int modular_sign(VariableSet vars) { return vars == VariableSet::even_parity ? 1 : -1; }
int integer_sign(VariableSet vars) { return vars == VariableSet::even_parity ? -1 : 1; }

}  // namespace

// -- CriterionEvaluator -------------------------------------------------------

CriterionEvaluator::CriterionEvaluator(const QuadratureGrid& grid, std::vector<double> lp_grid,
                                       VariableSet vars)
    : grid_(grid), lp_grid_(std::move(lp_grid)), vars_(vars) {
  if (lp_grid_.empty()) throw std::invalid_argument("CriterionEvaluator: empty l_p grid");
  const int nx = grid_.points();
  const auto nl = static_cast<Eigen::Index>(lp_grid_.size());
  rest1_.resize(nx, nl);
  rest2_.resize(nx, nl);
  int1_.resize(nx, nl);
  int2_.resize(nx, nl);
  for (Eigen::Index k = 0; k < nl; ++k) {
    const auto scales = ModularScales::from_lp(lp_grid_[k]);
    const auto x = moment_tables(grid_, scales.l_x, scales.l_x);
    const auto p = moment_tables(grid_, scales.l_p, scales.l_p);
    rest1_.col(k) = x.rest;
    rest2_.col(k) = x.rest2;
    int1_.col(k) = p.n;
    int2_.col(k) = p.n2;
  }
}

std::vector<CriterionRecord> CriterionEvaluator::evaluate_all(const JointDistribution& px,
                                                              const JointDistribution& pp) const {
  require_pair(px, pp);
  if (!(px.grid == grid_) || !(pp.grid == grid_))
    throw std::invalid_argument("CriterionEvaluator: distribution grid differs from evaluator grid");

  // For u = f(x1) + s f(x2) with per-point moment weights f, f2:
  //   <u>   = rows.f + s cols.f
  //   <u^2> = rows.f2 + cols.f2 + 2 s f^T W f
  auto variances = [](const MatrixXd& w, const MatrixXd& first, const MatrixXd& second, int sign) {
    const VectorXd rows = w.rowwise().sum();
    const VectorXd cols = w.colwise().sum().transpose();
    const VectorXd mean = first.transpose() * rows + sign * (first.transpose() * cols);
    const MatrixXd wf = w * first;
    const VectorXd cross = wf.cwiseProduct(first).colwise().sum().transpose();
    const VectorXd second_moment =
        second.transpose() * rows + second.transpose() * cols + 2.0 * sign * cross;
    return (second_moment - mean.cwiseAbs2()).cwiseMax(0.0).eval();
  };

  // Rows of W index mode 1, columns mode 2.
  const VectorXd var_mod = variances(normalized_weights(px), rest1_, rest2_, modular_sign(vars_));
  const VectorXd var_int = variances(normalized_weights(pp), int1_, int2_, integer_sign(vars_));

  std::vector<CriterionRecord> out(lp_grid_.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out[k] = {0.0, lp_grid_[k], var_mod(i), var_int(i), var_mod(i) + var_int(i)};
  }
  return out;
}

CriterionRecord CriterionEvaluator::best(const JointDistribution& px, const JointDistribution& pp) const {
  const auto all = evaluate_all(px, pp);
  const CriterionRecord* best = &all.front();
  for (const auto& r : all) {
    if (r.c_mec < best->c_mec || (r.c_mec == best->c_mec && r.l_p < best->l_p)) best = &r;
  }
  return *best;
}

// -- free functions -----------------------------------------------------------

CriterionRecord evaluate_criterion(const JointDistribution& px, const JointDistribution& pp,
                                   const ModularScales& scales, VariableSet vars) {
  scales.validate();
  return CriterionEvaluator(px.grid, {scales.l_p}, vars).evaluate_all(px, pp).front();
}

CriterionRecord optimize_lp(const JointDistribution& px, const JointDistribution& pp,
                            const std::vector<double>& lp_grid, VariableSet vars) {
  for (double lp : lp_grid)
    if (!(lp > 0)) throw std::invalid_argument("optimize_lp: l_p values must be positive");
  return CriterionEvaluator(px.grid, lp_grid, vars).best(px, pp);
}

std::vector<double> make_lp_grid(double min, double max, double step) {
  if (!(min > 0) || !(step > 0) || max < min)
    throw std::invalid_argument("make_lp_grid: need 0 < min <= max and step > 0");
  std::vector<double> grid;
  const auto count = static_cast<long>(std::floor((max - min) / step + 1e-9)) + 1;
  grid.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) grid.push_back(min + static_cast<double>(k) * step);
  return grid;
}

std::vector<double> default_lp_grid() { return make_lp_grid(2.0, 6.0, 0.02); }

double CollectiveDistributions::modular_variance() const {
  const double mean = modular_centers.dot(modular_weights);
  return std::max(0.0, modular_centers.cwiseAbs2().dot(modular_weights) - mean * mean);
}

double CollectiveDistributions::integer_variance() const {
  double mean = 0.0;
  double second = 0.0;
  for (Eigen::Index k = 0; k < integer_weights.size(); ++k) {
    const double n = static_cast<double>(integer_offset + k);
    mean += n * integer_weights(k);
    second += n * n * integer_weights(k);
  }
  return std::max(0.0, second - mean * mean);
}

CollectiveDistributions collective_distributions(const JointDistribution& px, const JointDistribution& pp,
                                                 const ModularScales& scales, VariableSet vars,
                                                 int bins_per_period, int subcells) {
  require_pair(px, pp);
  scales.validate();
  if (bins_per_period < 1 || subcells < 1)
    throw std::invalid_argument("collective_distributions: bins and subcells must be positive");
  const bool even = vars == VariableSet::even_parity;
  CollectiveDistributions out;

  // Modular part: each cell is split into subcells^2 point masses.
  {
    const MatrixXd w = normalized_weights(px);
    const int nx = px.grid.points();
    const double h = px.grid.step / subcells;
    VectorXd rest(nx * subcells);
    for (int i = 0; i < nx; ++i)
      for (int s = 0; s < subcells; ++s) {
        const double x = px.grid.coordinate(i) - px.grid.step / 2.0 + (s + 0.5) * h;
        rest(i * subcells + s) = modular_decompose(x, scales.l_x).rest / scales.l_x;
      }
    const int bins = 2 * bins_per_period;
    const double lo = even ? 0.0 : -1.0;
    const double width = 1.0 / bins_per_period;
    out.modular_weights = VectorXd::Zero(bins);
    out.modular_centers.resize(bins);
    for (int b = 0; b < bins; ++b) out.modular_centers(b) = lo + (b + 0.5) * width;
    const double sub_mass = 1.0 / (subcells * subcells);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nx; ++j) {
        const double cell = w(i, j) * sub_mass;
        if (cell == 0.0) continue;
        for (int s = 0; s < subcells; ++s)
          for (int t = 0; t < subcells; ++t) {
            const double r1 = rest(i * subcells + s);
            const double r2 = rest(j * subcells + t);
            const double u = even ? r1 + r2 : r1 - r2;
            const int b = std::clamp(static_cast<int>(std::floor((u - lo) / width)), 0, bins - 1);
            out.modular_weights(b) += cell;
          }
      }
  }

  // Integer part: exact cell fractions.
  {
    const MatrixXd w = normalized_weights(pp);
    const int np = pp.grid.points();
    std::vector<std::vector<std::pair<std::int64_t, double>>> frac(np);
    std::int64_t nmin = 0;
    std::int64_t nmax = 0;
    for (int i = 0; i < np; ++i) {
      const double a = pp.grid.coordinate(i) - pp.grid.step / 2.0;
      frac[i] = integer_fractions(a, a + pp.grid.step, scales.l_p);
      for (const auto& [n, f] : frac[i]) {
        nmin = std::min(nmin, n);
        nmax = std::max(nmax, n);
      }
    }
    const std::int64_t lo = even ? nmin - nmax : 2 * nmin;
    const std::int64_t hi = even ? nmax - nmin : 2 * nmax;
    out.integer_offset = lo;
    out.integer_weights = VectorXd::Zero(hi - lo + 1);
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < np; ++j) {
        if (w(i, j) == 0.0) continue;
        for (const auto& [n1, f1] : frac[i])
          for (const auto& [n2, f2] : frac[j]) {
            const std::int64_t k = even ? n1 - n2 : n1 + n2;
            out.integer_weights(k - lo) += w(i, j) * f1 * f2;
          }
      }
  }
  return out;
}

// -- time series --------------------------------------------------------------

QualifierTracker::QualifierTracker(const QuadratureGrid& grid, std::vector<double> lp_grid, VariableSet vars)
    : grid_(grid), evaluator_(grid, std::move(lp_grid), vars) {}

const CriterionRecord& QualifierTracker::add(double t, const DensityMatrix<>& rho) {
  const auto px = joint_position_distribution(rho, grid_);
  const auto pp = joint_momentum_distribution(rho, grid_);
  CriterionRecord r = evaluator_.best(px, pp);
  r.time = t;
  series_.push_back(r);
  if (series_.size() == 1 || r.c_mec < series_[argmin_].c_mec) argmin_ = series_.size() - 1;
  return series_.back();
}

QualifierResult QualifierTracker::result() const {
  if (series_.empty()) throw std::logic_error("QualifierTracker: no samples");
  const auto& m = series_[argmin_];
  QualifierResult out{m.c_mec, m.time, m.l_p, series_, false};
  out.minimum_at_horizon = series_.size() > 1 && argmin_ + 1 == series_.size();
  if (out.minimum_at_horizon) {
    std::ostringstream os;
    os << "C_mec minimum at the last sample t=" << m.time << "; horizon may be too short";
    warn(os.str());
  }
  return out;
}

QualifierResult qualifier_over_time(const EvolutionTrace& trace, const QuadratureGrid& grid,
                                    const std::vector<double>& lp_grid, VariableSet vars) {
  if (trace.snapshots.size() != trace.times.size() || trace.snapshots.empty())
    throw std::invalid_argument("qualifier_over_time: trace has no snapshots");
  QualifierTracker tracker(grid, lp_grid, vars);
  for (std::size_t k = 0; k < trace.times.size(); ++k) tracker.add(trace.times[k], trace.snapshots[k]);
  return tracker.result();
}

ModularUncertainty modular_uncertainty(const DensityMatrix<>& rho, const ModularScales& scales,
                                       const QuadratureGrid& grid) {
  scales.validate();
  const VectorXd px = quadrature_distribution(rho, grid, QuadratureKind::position);
  const VectorXd pp = quadrature_distribution(rho, grid, QuadratureKind::momentum);
  const double wx = px.sum();
  const double wp = pp.sum();
  const auto x = moment_tables(grid, scales.l_x, scales.l_x);
  const auto p = moment_tables(grid, scales.l_p, scales.l_p);
  const double r1 = px.dot(x.rest) / wx, r2 = px.dot(x.rest2) / wx;
  const double n1 = pp.dot(p.n) / wp, n2 = pp.dot(p.n2) / wp;
  return {std::max(0.0, n2 - n1 * n1), std::max(0.0, r2 - r1 * r1)};
}

void write_timeseries_csv(std::ostream& os, const std::vector<CriterionRecord>& series) {
  os << "t,lp_opt,var_modular,var_integer,c_mec\n";
  char line[160];
  for (const auto& r : series) {
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.10e,%.10e,%.10e\n", r.time, r.l_p, r.var_modular,
                  r.var_integer, r.c_mec);
    os << line;
  }
}

}  // namespace dopocat
