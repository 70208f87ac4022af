#include "dopocat/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "dopocat/fock.hpp"
#include "dopocat/log.hpp"

namespace dopocat {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(PointStatus status) {
  switch (status) {
    case PointStatus::ok: return "ok";
    case PointStatus::horizon_warning: return "horizon-warning";
    case PointStatus::numerical_failure: return "numerical-failure";
  }
  return "?";
}

namespace {

IntegrationControls effective_controls(const RunConfig& config, ModeSpace space) {
  return config.auto_step ? stable_controls(config.controls, config.params, space) : config.controls;
}

std::string format_value(double v, const char* fmt = "%.10e") {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

// -- single point -------------------------------------------------------------

PointResult evaluate_point(const RunConfig& config, bool keep_state) {
  config.validate();
  if (config.mode != RunMode::coupled) throw ConfigError("evaluate_point needs mode = coupled");
  const ModeSpace space = ModeSpace::two(config.cutoff);

  PointResult out;
  out.params = config.params;
  std::optional<StateVector<>> target;
  try {
    const IntegrationControls controls = effective_controls(config, space);
    out.dt_used = controls.dt;
    if (config.outputs.fidelity)
      target = entangled_cat(config.params.steady_amplitude(), CatParity::even, space);
    QualifierTracker tracker(config.resolved_grid(), config.lp_grid.values(), config.variables);

    auto observer = [&](double t, const DensityMatrix<>& rho) {
      const CriterionRecord& rec = tracker.add(t, rho);
      if (tracker.argmin() + 1 == tracker.series().size()) {
        out.purity_at_min = purity(rho);
        if (target) out.fidelity_at_min = fidelity_to_pure(rho, *target);
        if (keep_state) out.state_at_min = rho;
      }
      if (config.early_stop.should_stop(rec.c_mec, tracker.series()[tracker.argmin()].c_mec)) {
        out.stopped_early = true;
        return false;
      }
      return true;
    };
    integrate(DensityMatrix<>::vacuum(space), config.params, controls, observer);

    const QualifierResult q = tracker.result();
    out.c_mec_min = q.c_mec_min;
    out.argmin_time = q.argmin_time;
    out.argmin_lp = q.argmin_lp;
    out.series = q.series;
    out.status = q.minimum_at_horizon ? PointStatus::horizon_warning : PointStatus::ok;
  } catch (const IntegrationError& e) {
    out.status = PointStatus::numerical_failure;
    out.error = e.what();
  } catch (const std::domain_error& e) {
    out.status = PointStatus::numerical_failure;
    out.error = e.what();
  }
  if (out.status == PointStatus::numerical_failure) {
    out.c_mec_min = out.argmin_time = out.argmin_lp = std::numeric_limits<double>::quiet_NaN();
    out.purity_at_min = out.fidelity_at_min = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

namespace {

json run_header(const RunConfig& config) {
  return {{"tag", config.tag},
          {"mode", config.mode == RunMode::coupled ? "coupled" : "single"},
          {"variables", config.variables == VariableSet::even_parity ? "even" : "odd"},
          {"cutoff", config.cutoff},
          {"model", to_json(config.params)},
          {"t_final", config.controls.t_final}};
}

RunArtifacts run_single_mode(const RunConfig& config) {
  RunArtifacts artifacts;
  const ModeSpace space = ModeSpace::single(config.cutoff);
  ModelParams params = config.params;
  params.gamma_c = 0.0;
  json summary = run_header(config);
  std::vector<std::array<double, 3>> rows;
  double best = -1.0;
  double best_time = 0.0;
  double purity_at_best = 0.0;
  try {
    const IntegrationControls controls = effective_controls(config, space);
    summary["dt"] = controls.dt;
    const auto target = cat_state(params.steady_amplitude(), +1, space);
    integrate_single_mode(params, controls, config.cutoff, [&](double t, const DensityMatrix<>& rho) {
      const double f = fidelity_to_pure(rho, target);
      const double p = purity(rho);
      rows.push_back({t, f, p});
      if (f > best) {
        best = f;
        best_time = t;
        purity_at_best = p;
      }
      return true;
    });
    summary["status"] = rows.size() > 1 && best_time == rows.back()[0] ? "horizon-warning" : "ok";
    summary["max_fidelity"] = best;
    summary["argmax_time"] = best_time;
    summary["purity_at_max"] = purity_at_best;
  } catch (const IntegrationError& e) {
    summary["status"] = to_string(PointStatus::numerical_failure);
    summary["error"] = e.what();
    summary["error_time"] = e.time();
    artifacts.failed = true;
  }
  if (config.outputs.timeseries) {
    std::ostringstream os;
    os << "t,fidelity,purity\n";
    for (const auto& r : rows) os << format_value(r[0], "%.6f") << ',' << format_value(r[1]) << ',' << format_value(r[2]) << '\n';
    const fs::path path = config.output_dir / (config.tag + "__fidelity.csv");
    write_text(path, os.str());
    artifacts.files.push_back(path);
  }
  artifacts.summary = config.output_dir / (config.tag + "__summary.json");
  write_text(artifacts.summary, summary.dump(2) + "\n");
  return artifacts;
}

}  // namespace

RunArtifacts run_single(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  if (config.mode == RunMode::single) return run_single_mode(config);

  RunArtifacts artifacts;
  const bool keep = config.outputs.wigner || config.outputs.snapshot;
  const PointResult r = evaluate_point(config, keep);
  artifacts.failed = r.status == PointStatus::numerical_failure;

  json summary = run_header(config);
  summary["status"] = to_string(r.status);
  if (!r.error.empty()) summary["error"] = r.error;
  summary["dt"] = r.dt_used;
  summary["samples"] = r.series.size();
  summary["c_mec_min"] = nan_to_null(r.c_mec_min);
  summary["argmin_time"] = nan_to_null(r.argmin_time);
  summary["argmin_lp"] = nan_to_null(r.argmin_lp);
  summary["threshold"] = kEntanglementThreshold;
  summary["entangled"] = !artifacts.failed && r.c_mec_min <= kEntanglementThreshold;
  summary["stopped_early"] = r.stopped_early;
  if (config.outputs.purity) summary["purity_at_min"] = nan_to_null(r.purity_at_min);
  if (config.outputs.fidelity) summary["fidelity_at_min"] = nan_to_null(r.fidelity_at_min);

  const fs::path dir = config.output_dir;
  if (config.outputs.timeseries) {
    std::ostringstream os;
    write_timeseries_csv(os, r.series);
    const fs::path path = dir / (config.tag + "__timeseries.csv");
    write_text(path, os.str());
    artifacts.files.push_back(path);
  }
  if (r.state_at_min && config.outputs.wigner) {
    const auto grid = SectionGrid::for_amplitude(std::abs(config.params.steady_amplitude()));
    for (const auto& [plane, name] : {std::pair{WignerPlane::real, "real"}, std::pair{WignerPlane::imaginary, "imag"}}) {
      std::ostringstream os;
      write_csv(os, wigner_section(*r.state_at_min, plane, grid));
      const fs::path path = dir / (config.tag + "__wigner_" + name + ".csv");
      write_text(path, os.str());
      artifacts.files.push_back(path);
    }
  }
  if (r.state_at_min && config.outputs.snapshot) {
    const fs::path path = dir / (config.tag + "__snapshot.bin");
    write_snapshot(path, *r.state_at_min);
    artifacts.files.push_back(path);
  }
  artifacts.summary = dir / (config.tag + "__summary.json");
  write_text(artifacts.summary, summary.dump(2) + "\n");
  return artifacts;
}

// -- sweeps -------------------------------------------------------------------

Eigen::MatrixXd SweepResult::c_mec_grid() const {
  Eigen::MatrixXd m(values1.size(), values2.size());
  for (std::size_t i = 0; i < values1.size(); ++i)
    for (std::size_t j = 0; j < values2.size(); ++j) m(i, j) = at(i, j).c_mec_min;
  return m;
}

int SweepResult::count_below(double threshold) const {
  return static_cast<int>(std::count_if(points.begin(), points.end(), [&](const PointResult& p) {
    return p.status != PointStatus::numerical_failure && p.c_mec_min <= threshold;
  }));
}

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  SweepResult result;
  result.axis1 = config.axis1;
  result.axis2 = config.axis2;
  result.values1 = config.axis1.values();
  result.values2 = config.axis2.values();
  const std::size_t n = result.values1.size() * result.values2.size();
  result.points.resize(n);

  std::vector<RunConfig> jobs(n, config.base);
  for (std::size_t k = 0; k < n; ++k) {
    set_axis(jobs[k].params, config.axis1.axis, result.values1[k / result.values2.size()]);
    set_axis(jobs[k].params, config.axis2.axis, result.values2[k % result.values2.size()]);
    jobs[k].validate();
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        result.points[k] = evaluate_point(jobs[k]);
      } catch (const std::exception& e) {
        PointResult failed;
        failed.params = jobs[k].params;
        failed.status = PointStatus::numerical_failure;
        failed.error = e.what();
        result.points[k] = std::move(failed);
      }
    }
  };
  const int workers = std::min<int>(resolve_workers(config.workers), static_cast<int>(n));
  std::vector<std::jthread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  return result;
}

void write_points_csv(std::ostream& os, const SweepResult& result) {
  os << "axis1,axis2,c_mec_min,status\n";
  for (std::size_t i = 0; i < result.values1.size(); ++i)
    for (std::size_t j = 0; j < result.values2.size(); ++j) {
      const auto& p = result.at(i, j);
      os << format_value(result.values1[i], "%.6f") << ',' << format_value(result.values2[j], "%.6f") << ','
         << format_value(p.c_mec_min) << ',' << to_string(p.status) << '\n';
    }
}

void write_detail_csv(std::ostream& os, const SweepResult& result) {
  os << "axis1,axis2,c_mec_min,argmin_t,argmin_lp,purity_at_min,status\n";
  for (std::size_t i = 0; i < result.values1.size(); ++i)
    for (std::size_t j = 0; j < result.values2.size(); ++j) {
      const auto& p = result.at(i, j);
      os << format_value(result.values1[i], "%.6f") << ',' << format_value(result.values2[j], "%.6f") << ','
         << format_value(p.c_mec_min) << ',' << format_value(p.argmin_time, "%.6f") << ','
         << format_value(p.argmin_lp, "%.6f") << ',' << format_value(p.purity_at_min) << ',' << to_string(p.status)
         << '\n';
    }
}

std::vector<fs::path> write_sweep_outputs(const SweepResult& result, const std::string& tag, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string stem = tag + "__" + axis_name(result.axis1.axis) + "_" + axis_name(result.axis2.axis);
  std::vector<fs::path> files;
  {
    std::ostringstream os;
    write_points_csv(os, result);
    files.push_back(dir / (stem + ".csv"));
    write_text(files.back(), os.str());
  }
  {
    std::ostringstream os;
    write_detail_csv(os, result);
    files.push_back(dir / (stem + "__detail.csv"));
    write_text(files.back(), os.str());
  }
  {
    std::ostringstream os;
    write_boundary_csv(os, extract_boundary(result.c_mec_grid(), result.values1, result.values2));
    files.push_back(dir / (stem + "__boundary.csv"));
    write_text(files.back(), os.str());
  }
  return files;
}

// -- boundaries ---------------------------------------------------------------

std::vector<Polyline> extract_boundary(const Eigen::MatrixXd& values, const std::vector<double>& x,
                                       const std::vector<double>& y, double threshold) {
  const auto nx = static_cast<int>(x.size());
  const auto ny = static_cast<int>(y.size());
  if (values.rows() != nx || values.cols() != ny)
    throw std::invalid_argument("extract_boundary: value grid does not match the axes");

  auto below = [&](int i, int j) { return values(i, j) <= threshold; };
  // Edge ids: x-edges (i,j)-(i+1,j) first, then y-edges (i,j)-(i,j+1).
  const int y_offset = std::max(nx - 1, 0) * ny;
  auto x_edge = [&](int i, int j) { return i * ny + j; };
  auto y_edge = [&](int i, int j) { return y_offset + i * (ny - 1) + j; };
  auto lerp = [&](double v0, double v1) { return (threshold - v0) / (v1 - v0); };
  auto edge_point = [&](int id) -> BoundaryPoint {
    if (id < y_offset) {
      const int i = id / ny, j = id % ny;
      return {x[i] + lerp(values(i, j), values(i + 1, j)) * (x[i + 1] - x[i]), y[j]};
    }
    const int k = id - y_offset;
    const int i = k / (ny - 1), j = k % (ny - 1);
    return {x[i], y[j] + lerp(values(i, j), values(i, j + 1)) * (y[j + 1] - y[j])};
  };

  std::vector<std::array<int, 2>> segments;
  for (int i = 0; i + 1 < nx; ++i)
    for (int j = 0; j + 1 < ny; ++j) {
      const double c[4] = {values(i, j), values(i + 1, j), values(i + 1, j + 1), values(i, j + 1)};
      if (std::any_of(std::begin(c), std::end(c), [](double v) { return std::isnan(v); })) continue;
      const bool b[4] = {below(i, j), below(i + 1, j), below(i + 1, j + 1), below(i, j + 1)};
      // Cell edges in order bottom, right, top, left.
      const int edge[4] = {x_edge(i, j), y_edge(i + 1, j), x_edge(i, j + 1), y_edge(i, j)};
      std::vector<int> cut;
      for (int e = 0; e < 4; ++e)
        if (b[e] != b[(e + 1) % 4]) cut.push_back(e);
      if (cut.size() == 2) {
        segments.push_back({edge[cut[0]], edge[cut[1]]});
      } else if (cut.size() == 4) {
        const bool centre = (c[0] + c[1] + c[2] + c[3]) / 4.0 <= threshold;
        if (centre == b[0]) {
          segments.push_back({edge[0], edge[1]});
          segments.push_back({edge[2], edge[3]});
        } else {
          segments.push_back({edge[3], edge[0]});
          segments.push_back({edge[1], edge[2]});
        }
      }
    }
  if (segments.empty()) {
    warn("no threshold crossing in the grid; boundary is empty");
    return {};
  }

  std::map<int, std::vector<int>> touching;
  for (int s = 0; s < static_cast<int>(segments.size()); ++s)
    for (int e : segments[s]) touching[e].push_back(s);
  std::vector<bool> used(segments.size(), false);

  auto walk = [&](int start_edge) {
    std::vector<int> chain{start_edge};
    int edge = start_edge;
    for (;;) {
      int next = -1;
      for (int s : touching[edge])
        if (!used[s]) {
          next = s;
          break;
        }
      if (next < 0) break;
      used[next] = true;
      edge = segments[next][0] == edge ? segments[next][1] : segments[next][0];
      chain.push_back(edge);
    }
    Polyline line;
    for (int e : chain) line.push_back(edge_point(e));
    return line;
  };

  std::vector<Polyline> lines;
  // Open curves start at edges touched once (grid border), closed ones anywhere.
  for (const auto& [edge, segs] : touching)
    if (segs.size() == 1 && !used[segs[0]]) lines.push_back(walk(edge));
  for (const auto& [edge, segs] : touching)
    if (std::any_of(segs.begin(), segs.end(), [&](int s) { return !used[s]; })) lines.push_back(walk(edge));
  return lines;
}

void write_boundary_csv(std::ostream& os, const std::vector<Polyline>& boundary) {
  os << "segment,axis1,axis2\n";
  for (std::size_t s = 0; s < boundary.size(); ++s)
    for (const auto& p : boundary[s])
      os << s << ',' << format_value(p.x, "%.10e") << ',' << format_value(p.y, "%.10e") << '\n';
}

std::vector<ProfilePoint> boundary_profile(const Eigen::MatrixXd& values, const std::vector<double>& x,
                                           const std::vector<double>& y, double threshold) {
  if (values.rows() != static_cast<Eigen::Index>(x.size()) || values.cols() != static_cast<Eigen::Index>(y.size()))
    throw std::invalid_argument("boundary_profile: value grid does not match the axes");
  std::vector<ProfilePoint> out;
  const int ny = static_cast<int>(y.size());
  for (int i = 0; i < static_cast<int>(x.size()); ++i) {
    ProfilePoint p{x[i], std::nullopt, false};
    int last = -1;
    for (int j = 0; j < ny; ++j)
      if (values(i, j) <= threshold) last = j;
    if (last == ny - 1) {
      p.y = y[last];
      p.censored = true;
    } else if (last >= 0) {
      const double v0 = values(i, last);
      const double v1 = values(i, last + 1);
      p.y = std::isnan(v1) ? y[last] : y[last] + (threshold - v0) / (v1 - v0) * (y[last + 1] - y[last]);
    }
    out.push_back(p);
  }
  return out;
}

// -- squeezed suite -----------------------------------------------------------

namespace {

std::string gamma_c_tag(const std::string& tag, double gamma_c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", gamma_c);
  return tag + "_gc" + buf;
}

}  // namespace

SqueezedSuiteResult run_squeezed_suite(const SqueezedSuiteConfig& config) {
  config.validate();
  SqueezedSuiteResult out;
  out.gamma_c_values = config.gamma_c_values;
  for (double gc : config.gamma_c_values) {
    SweepConfig s;
    s.tag = gamma_c_tag(config.tag, gc);
    s.output_dir = config.output_dir;
    s.axis1 = config.pump_axis;
    s.axis2 = config.loss_axis;
    s.base = config.base;
    s.base.params.gamma_sq = config.gamma_sq;
    s.base.params.gamma_c = gc;
    s.workers = config.workers;
    out.pump_sweeps.push_back(run_sweep(s));
  }
  SweepConfig s;
  s.tag = config.tag;
  s.output_dir = config.output_dir;
  s.axis1 = config.squeeze_axis;
  s.axis2 = config.squeeze_loss_axis;
  s.base = config.base;
  s.base.params.pump = config.squeeze_sweep_pump;
  s.base.params.gamma_c = config.squeeze_sweep_gamma_c;
  s.workers = config.workers;
  out.squeeze_sweep = run_sweep(s);
  return out;
}

std::vector<fs::path> write_squeezed_outputs(const SqueezedSuiteResult& result, const SqueezedSuiteConfig& config) {
  std::vector<fs::path> files;
  for (std::size_t k = 0; k < result.pump_sweeps.size(); ++k) {
    auto f = write_sweep_outputs(result.pump_sweeps[k], gamma_c_tag(config.tag, result.gamma_c_values[k]),
                                 config.output_dir);
    files.insert(files.end(), f.begin(), f.end());
  }
  auto f = write_sweep_outputs(result.squeeze_sweep, config.tag, config.output_dir);
  files.insert(files.end(), f.begin(), f.end());
  return files;
}

// -- snapshots ----------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("snapshot: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_snapshot(const fs::path& path, const DensityMatrix<>& rho) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const ModeSpace s = rho.space();
  put_le<std::int32_t>(out, s.n_modes);
  put_le<std::int32_t>(out, s.cutoff);
  for (int i = 0; i < s.dim(); ++i)
    for (int j = 0; j < s.dim(); ++j) {
      put_le(out, rho.matrix()(i, j).real());
      put_le(out, rho.matrix()(i, j).imag());
    }
}

DensityMatrix<> read_snapshot(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto n_modes = get_le<std::int32_t>(in);
  const auto cutoff = get_le<std::int32_t>(in);
  if (cutoff > 200) throw std::runtime_error("snapshot: implausible cutoff");
  const ModeSpace s = ModeSpace::checked({cutoff, n_modes});
  Eigen::MatrixXcd m(s.dim(), s.dim());
  for (int i = 0; i < s.dim(); ++i)
    for (int j = 0; j < s.dim(); ++j) {
      const double re = get_le<double>(in);
      const double im = get_le<double>(in);
      m(i, j) = {re, im};
    }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("snapshot: trailing bytes");
  return {s, std::move(m)};
}

}  // namespace dopocat
