// Command-line front end: run, sweep, squeezed-sweep, analyze, boundary.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dopocat/fock.hpp"
#include "dopocat/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dopocat;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

void print_files(const std::vector<fs::path>& files) {
  for (const auto& f : files) std::cout << f.string() << '\n';
}

int cmd_run(const std::string& path, const std::string& out_dir, const std::string& tag) {
  RunConfig config = run_config_from_json(load_config_file(path));
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (!tag.empty()) config.tag = tag;
  const RunArtifacts a = run_single(config);
  print_files(a.files);
  std::cout << a.summary.string() << '\n';
  if (a.failed) {
    std::ifstream in(a.summary);
    std::cerr << in.rdbuf();
    return kExitFailure;
  }
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& out_dir, int workers) {
  SweepConfig config = sweep_config_from_json(load_config_file(path));
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (workers > 0) config.workers = workers;
  const SweepResult r = run_sweep(config);
  print_files(write_sweep_outputs(r, config.tag, config.output_dir));
  return 0;
}

int cmd_squeezed(const std::string& path, const std::string& out_dir, int workers) {
  SqueezedSuiteConfig config = squeezed_suite_config_from_json(load_config_file(path));
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (workers > 0) config.workers = workers;
  const SqueezedSuiteResult r = run_squeezed_suite(config);
  print_files(write_squeezed_outputs(r, config));
  return 0;
}

int cmd_analyze(const std::string& path, const std::string& out_dir, const std::string& tag, bool wigner,
                double extent, double step, double amplitude) {
  const DensityMatrix<> rho = read_snapshot(path);
  json report{{"snapshot", path},
              {"n_modes", rho.space().n_modes},
              {"cutoff", rho.space().cutoff},
              {"trace_error", rho.trace_error()},
              {"purity", purity(rho)}};
  if (amplitude > 0) {
    const std::complex<double> alpha(0.0, amplitude);
    if (rho.space().n_modes == 2) {
      report["fidelity_even_cat"] = fidelity_to_pure(rho, entangled_cat(alpha, CatParity::even, rho.space()));
      const auto grid = QuadratureGrid::for_amplitude(amplitude);
      const auto best = optimize_lp(joint_position_distribution(rho, grid), joint_momentum_distribution(rho, grid),
                                    default_lp_grid(), VariableSet::even_parity);
      report["c_mec"] = best.c_mec;
      report["lp_opt"] = best.l_p;
    } else {
      report["fidelity_cat"] = fidelity_to_pure(rho, cat_state(alpha, +1, rho.space()));
    }
  }
  if (wigner) {
    if (rho.space().n_modes != 2) throw ConfigError("wigner sections need a two-mode snapshot");
    fs::create_directories(out_dir);
    SectionGrid grid = SectionGrid::for_amplitude(amplitude);
    if (extent > 0) grid.extent = extent;
    if (step > 0) grid.step = step;
    json files = json::array();
    for (const auto& [plane, name] : {std::pair{WignerPlane::real, "real"}, std::pair{WignerPlane::imaginary, "imag"}}) {
      const fs::path f = fs::path(out_dir) / (tag + "__wigner_" + name + ".csv");
      std::ofstream os(f);
      write_csv(os, wigner_section(rho, plane, grid));
      files.push_back(f.string());
    }
    report["wigner_files"] = files;
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

// Reads a points CSV (axis1,axis2,c_mec_min,status) back into a grid.
int cmd_boundary(const std::string& path, const std::string& out, double threshold) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("axis1,axis2,c_mec_min", 0) != 0) throw ConfigError(path + ": not a sweep points CSV");
  std::map<std::pair<double, double>, double> cells;
  std::set<double> xs, ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ','))
      throw ConfigError(path + ": malformed row '" + line + "'");
    const double x = std::stod(a), y = std::stod(b);
    cells[{x, y}] = c == "nan" ? std::nan("") : std::stod(c);
    xs.insert(x);
    ys.insert(y);
  }
  const std::vector<double> x(xs.begin(), xs.end()), y(ys.begin(), ys.end());
  Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(x.size(), y.size(), std::nan(""));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (auto it = cells.find({x[i], y[j]}); it != cells.end()) grid(i, j) = it->second;
  const auto lines = extract_boundary(grid, x, y, threshold);
  if (out.empty()) {
    write_boundary_csv(std::cout, lines);
  } else {
    std::ofstream os(out);
    write_boundary_csv(os, lines);
    std::cout << out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entangled cat states in coupled parametric oscillators: simulation and sweeps"};
  app.require_subcommand(1);

  std::string config_path, out_dir, tag;
  int workers = 0;

  auto* run = app.add_subcommand("run", "Single run: criterion time series and summary");
  run->add_option("config", config_path, "JSON or key = value config")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output-dir", out_dir, "Override output_dir");
  run->add_option("--tag", tag, "Override tag");

  auto* sweep = app.add_subcommand("sweep", "Two-axis parameter sweep");
  sweep->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--output-dir", out_dir);
  sweep->add_option("-j,--workers", workers, "Worker threads (DOPOCAT_WORKERS overrides)");

  auto* squeezed = app.add_subcommand("squeezed-sweep", "Sweeps with the squeezed single-photon reservoir");
  squeezed->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  squeezed->add_option("-o,--output-dir", out_dir);
  squeezed->add_option("-j,--workers", workers);

  std::string snapshot, analyze_dir = ".", analyze_tag = "analyze";
  bool wigner = false;
  double extent = 0.0, step = 0.0, amplitude = 0.0;
  auto* analyze = app.add_subcommand("analyze", "Purity, fidelity and Wigner sections of a saved snapshot");
  analyze->add_option("snapshot", snapshot)->required()->check(CLI::ExistingFile);
  analyze->add_flag("--wigner", wigner, "Write real and imaginary plane sections");
  analyze->add_option("--amplitude", amplitude, "|alpha| of the target cat (imaginary amplitude)");
  analyze->add_option("--extent", extent, "Section half-width");
  analyze->add_option("--step", step, "Section step");
  analyze->add_option("-o,--output-dir", analyze_dir, "Directory for section CSVs")->capture_default_str();
  analyze->add_option("--tag", analyze_tag)->capture_default_str();

  std::string points, boundary_out;
  double threshold = kEntanglementThreshold;
  auto* boundary = app.add_subcommand("boundary", "Threshold boundary of a sweep points CSV");
  boundary->add_option("points", points)->required()->check(CLI::ExistingFile);
  boundary->add_option("-o,--output", boundary_out);
  boundary->add_option("--threshold", threshold)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir, tag);
    if (*sweep) return cmd_sweep(config_path, out_dir, workers);
    if (*squeezed) return cmd_squeezed(config_path, out_dir, workers);
    if (*analyze) return cmd_analyze(snapshot, analyze_dir, analyze_tag, wigner, extent, step, amplitude);
    if (*boundary) return cmd_boundary(points, boundary_out, threshold);
  } catch (const ConfigError& e) {
    std::cerr << json{{"status", "config-error"}, {"error", e.what()}}.dump() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << json{{"status", "error"}, {"error", e.what()}}.dump() << '\n';
    return kExitFailure;
  }
  return 0;
}
