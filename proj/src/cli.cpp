#include "lmg/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lmg/analysis.hpp"
#include "lmg/classical_flow.hpp"
#include "lmg/errors.hpp"
#include "lmg/io.hpp"
#include "lmg/monitored_quantum.hpp"
#include "lmg/parallel.hpp"
#include "lmg/semiclassical.hpp"

namespace lmg {

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> grid(static_cast<std::size_t>(n));
  if (n == 1) {
    grid[0] = lo;
    return grid;
  }
  for (int i = 0; i < n; ++i) grid[std::size_t(i)] = lo + (hi - lo) * i / (n - 1);
  return grid;
}

std::vector<double> logspace(double lo, double hi, int n) {
  auto grid = linspace(std::log(lo), std::log(hi), n);
  for (double& g : grid) g = std::exp(g);
  return grid;
}

// Collects artifact paths and per-run diagnostics for the manifest.
struct ArtifactSink {
  std::filesystem::path outdir;
  std::vector<std::string> files;
  nlohmann::json diagnostics = nlohmann::json::object();

  explicit ArtifactSink(const std::string& dir) : outdir(dir) {
    std::filesystem::create_directories(outdir);
  }
  std::string path_of(const std::string& name) const {
    return (outdir / name).string();
  }
  CsvWriter csv(const std::string& name, const RunConfig& config,
                const std::string& columns) {
    CsvWriter w(path_of(name));
    files.push_back(name);
    w.comment("rng=" + std::string(NoiseStream::algorithm) +
              " base_seed=" + std::to_string(config.base_seed));
    w.comment("h=" + format_g17(config.h) + " gamma=" + format_g17(config.gamma) +
              " N=" + std::to_string(config.n_particles));
    w.header(columns);
    return w;
  }
  void plain_file(const std::string& name, const std::string& content) {
    std::ofstream out(path_of(name));
    out << content;
    files.push_back(name);
  }
};

void write_manifest(ArtifactSink& sink, const RunConfig& config,
                    const std::string& status, double wall_seconds,
                    const std::string& error_message = "") {
  nlohmann::json manifest;
  manifest["status"] = status;
  manifest["subcommand"] = config.subcommand;
  manifest["config"] = config_to_json(config);
  manifest["rng"] = {{"algorithm", std::string(NoiseStream::algorithm)},
                     {"base_seed", config.base_seed}};
  manifest["versions"] = {{"lmgsim", kVersion}, {"compiler", __VERSION__}};
  manifest["tolerances"] = {{"lindblad_trace_drift_per_step", 1e-6},
                            {"flow_energy_drift", 1e-4},
                            {"soft_absorption_epsilon", config.epsilon},
                            {"density_positivity", 1e-8}};
  manifest["diagnostics"] = sink.diagnostics;
  manifest["wall_clock_seconds"] = wall_seconds;
  manifest["files"] = sink.files;
  if (!error_message.empty()) manifest["error"] = error_message;
  std::ofstream out(sink.path_of("manifest.json"));
  out << manifest.dump(2) << "\n";
}

double resolved_t_final(const RunConfig& config) {
  if (config.t_final > 0.0) return config.t_final;
  if (config.subcommand == "sweep") return 0.0;  // per-cell default
  if (config.subcommand == "oracle") {
    return *std::max_element(config.taus.begin(), config.taus.end());
  }
  return 10.0;
}

PhasePoint semiclassical_initial(const RunConfig& config) {
  return {config.mz0, config.phi0};
}

// --- subcommand implementations ---------------------------------------------

void cmd_trajectory(const RunConfig& config, ArtifactSink& sink) {
  const double t_final = resolved_t_final(config);
  if (config.n_particles > 0) {
    const ModelSpec model = make_model(config.h, config.gamma, config.n_particles);
    const PureState initial =
        coherent_state(model.ops, {config.theta, config.phi0});
    NoiseStream noise(config.base_seed, 0);
    const TrajectoryRecord rec = sse_trajectory(model, initial, t_final, config.dt,
                                                config.dt_record, noise);
    auto csv = sink.csv("trajectory.csv", config, "t,mx,my,mz,mz2,norm_drift");
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
      csv.row({rec.times[k], rec.mx[k], rec.my[k], rec.mz[k], rec.mz2[k],
               rec.norm_drift[k]});
    }
    sink.diagnostics["mean_norm_drift"] = rec.norm_drift.back();
    sink.diagnostics["blocks_used"] = noise.blocks_used();
  } else {
    NoiseStream noise(config.base_seed, 0);
    const SemiclassicalTrajectory traj =
        simulate_trajectory(semiclassical_initial(config), config.h, config.gamma,
                            t_final, config.dt, config.dt_record, noise);
    auto csv = sink.csv("trajectory.csv", config, "t,mz,phi,absorbed");
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      double absorbed = 0.0;
      if (traj.absorbed != Absorption::None &&
          traj.times[k] >= traj.absorption_time) {
        absorbed = traj.absorbed == Absorption::Plus ? 1.0 : -1.0;
      }
      csv.row({traj.times[k], traj.mz[k], wrap_angle(traj.phi[k]), absorbed});
    }
    sink.diagnostics["absorbed"] = int(traj.absorbed);
  }
}

void write_semiclassical_summary(const RunConfig& config, ArtifactSink& sink,
                                 const EnsembleSummary& summary) {
  auto csv = sink.csv("summary.csv", config, "t,mean_mz,var_mz,se_mz");
  for (std::size_t k = 0; k < summary.times.size(); ++k) {
    csv.row({summary.times[k], summary.mean_mz[k], summary.var_mz[k],
             summary.se_mz[k]});
  }
  auto hist = sink.csv("histogram.csv", config, "t,bin_left,bin_right,mass");
  for (std::size_t k = 0; k < summary.times.size(); ++k) {
    const Histogram& hg = summary.hist_mz[k];
    for (std::size_t b = 0; b < hg.mass.size(); ++b) {
      if (hg.mass[b] == 0.0) continue;
      hist.row({summary.times[k], hg.bin_left(b), hg.bin_right(b), hg.mass[b]});
    }
  }
  sink.diagnostics["n_plus"] = summary.n_plus;
  sink.diagnostics["n_minus"] = summary.n_minus;
  sink.diagnostics["n_unabsorbed"] = summary.n_unabsorbed;
  sink.diagnostics["t_classify"] = summary.t_classify;
  sink.diagnostics["unabsorbed_fraction"] =
      double(summary.n_unabsorbed) / double(summary.n_traj);
  try {
    const PPlusEstimate est = p_plus(summary);
    sink.diagnostics["p_plus"] = {{"count_based", est.value},
                                  {"stderr", est.stderr_value},
                                  {"mean_based", est.mean_based},
                                  {"mean_based_stderr", est.mean_based_stderr}};
  } catch (const InconclusiveError&) {
    sink.diagnostics["p_plus"] = "inconclusive";
  }
}

void cmd_ensemble(const RunConfig& config, ArtifactSink& sink) {
  const double t_final = resolved_t_final(config);
  if (config.n_particles > 0) {
    const ModelSpec model = make_model(config.h, config.gamma, config.n_particles);
    const PureState initial =
        coherent_state(model.ops, {config.theta, config.phi0});
    const auto records =
        run_sse_ensemble(model, initial, t_final, config.dt, config.dt_record,
                         config.base_seed, config.n_traj, config.workers);
    const auto summary = summarize_quantum_ensemble(records, config.bins);
    auto csv = sink.csv("summary.csv", config,
                        "t,mean_mx,mean_my,mean_mz,mean_mz2,var_mz,se_mz");
    for (std::size_t k = 0; k < summary.times.size(); ++k) {
      csv.row({summary.times[k], summary.mean_mx[k], summary.mean_my[k],
               summary.mean_mz[k], summary.mean_mz2[k], summary.var_mz[k],
               summary.se_mz[k]});
    }
    auto hist = sink.csv("histogram.csv", config, "t,bin_left,bin_right,mass");
    for (std::size_t k = 0; k < summary.times.size(); ++k) {
      const Histogram& hg = summary.hist_mz[k];
      for (std::size_t b = 0; b < hg.mass.size(); ++b) {
        if (hg.mass[b] == 0.0) continue;
        hist.row({summary.times[k], hg.bin_left(b), hg.bin_right(b), hg.mass[b]});
      }
    }
    sink.diagnostics["mean_norm_drift"] = summary.mean_norm_drift;
  } else {
    SemiclassicalEnsembleConfig run;
    run.h = config.h;
    run.gamma = config.gamma;
    run.initial = semiclassical_initial(config);
    run.dt = config.dt;
    run.t_final = t_final;
    run.dt_record = config.dt_record;
    run.n_trajectories = config.n_traj;
    run.base_seed = config.base_seed;
    run.workers = config.workers;
    run.max_doublings = config.max_doublings;
    const auto ensemble = run_semiclassical_ensemble(run);
    const auto summary =
        summarize_ensemble(ensemble.trajectories, config.epsilon, config.bins);
    write_semiclassical_summary(config, sink, summary);
    sink.diagnostics["t_final_used"] = ensemble.t_final_used;
    sink.diagnostics["doublings"] = ensemble.doublings;
  }
}

void cmd_lindblad(const RunConfig& config, ArtifactSink& sink) {
  if (config.n_particles < 1) throw ConfigError("lindblad requires N >= 1");
  const ModelSpec model = make_model(config.h, config.gamma, config.n_particles);
  const Matrix rho0 = coherent_density(model.ops, {config.theta, config.phi0});
  const double t_final = resolved_t_final(config);
  std::vector<double> grid;
  for (double t = config.dt_record; t <= t_final + 1e-12; t += config.dt_record) {
    grid.push_back(t);
  }
  const double dt = config.lindblad_dt > 0.0
                        ? config.lindblad_dt
                        : std::min(config.dt, lindblad_stable_dt(model));
  const DensityRecord rec = lindblad_evolve(model, rho0, grid, dt);
  auto csv = sink.csv("density.csv", config, "t,mx,my,mz,purity,trace_err");
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    csv.row({rec.times[k], rec.mx[k], rec.my[k], rec.mz[k], rec.purity[k],
             rec.trace_err[k]});
  }
  sink.diagnostics["max_trace_drift"] = rec.max_trace_drift;
  sink.diagnostics["lindblad_dt"] = dt;
}

void cmd_compare(const RunConfig& config, ArtifactSink& sink) {
  if (config.n_particles < 1) throw ConfigError("compare requires N >= 1");
  const ModelSpec model = make_model(config.h, config.gamma, config.n_particles);
  const PureState initial = coherent_state(model.ops, {config.theta, config.phi0});
  const double t_final = resolved_t_final(config);

  // Matched noise: the SSE and the semiclassical integrator consume the
  // identical Wiener stream (same base seed and trajectory index).
  NoiseStream sse_noise(config.base_seed, 0);
  NoiseStream semi_noise(config.base_seed, 0);
  const TrajectoryRecord quantum = sse_trajectory(model, initial, t_final,
                                                  config.dt, config.dt_record,
                                                  sse_noise);
  const PhasePoint start{std::cos(config.theta), config.phi0};
  const SemiclassicalTrajectory classical =
      simulate_trajectory(start, config.h, config.gamma, t_final, config.dt,
                          config.dt_record, semi_noise);
  auto traj_csv = sink.csv("compare_trajectory.csv", config,
                           "t,mz_sse,mz_semiclassical,gap_sse,abs_diff");
  const auto gap = factorization_gap(quantum);
  double max_diff = 0.0;
  for (std::size_t k = 0; k < quantum.times.size(); ++k) {
    const double diff = std::abs(quantum.mz[k] - classical.mz[k]);
    max_diff = std::max(max_diff, diff);
    traj_csv.row({quantum.times[k], quantum.mz[k], classical.mz[k], gap[k], diff});
  }
  sink.diagnostics["max_abs_diff_matched"] = max_diff;

  // Ensemble means: finite-N Lindblad against the N = infinity average.
  const Matrix rho0 = coherent_density(model.ops, {config.theta, config.phi0});
  const double dt_lindblad = config.lindblad_dt > 0.0
                                 ? config.lindblad_dt
                                 : std::min(config.dt, lindblad_stable_dt(model));
  const DensityRecord density = lindblad_evolve(model, rho0, quantum.times, dt_lindblad);
  SemiclassicalEnsembleConfig run;
  run.h = config.h;
  run.gamma = config.gamma;
  run.initial = start;
  run.dt = config.dt;
  run.t_final = t_final;
  run.dt_record = config.dt_record;
  run.n_trajectories = config.n_traj;
  run.base_seed = config.base_seed;
  run.trajectory_offset = 1;  // index 0 is the matched pair above
  run.workers = config.workers;
  run.max_doublings = 0;
  const auto ensemble = run_semiclassical_ensemble(run);
  const auto summary = summarize_ensemble(ensemble.trajectories, config.epsilon,
                                          config.bins);
  auto mean_csv = sink.csv("compare_mean.csv", config,
                           "t,mz_lindblad,mz_semiclassical_mean,se_mz");
  double max_mean_gap = 0.0;
  for (std::size_t k = 0; k < density.times.size(); ++k) {
    max_mean_gap = std::max(max_mean_gap,
                            std::abs(density.mz[k] - summary.mean_mz[k]));
    mean_csv.row({density.times[k], density.mz[k], summary.mean_mz[k],
                  summary.se_mz[k]});
  }
  sink.diagnostics["max_mean_gap"] = max_mean_gap;
  sink.diagnostics["max_trace_drift"] = density.max_trace_drift;
}

void cmd_sweep(const RunConfig& config, ArtifactSink& sink) {
  SweepConfig sweep;
  sweep.h_grid = linspace(config.h_min, config.h_max, config.h_count);
  sweep.gamma_grid =
      config.gamma_log ? logspace(config.gamma_min, config.gamma_max, config.gamma_count)
                       : linspace(config.gamma_min, config.gamma_max, config.gamma_count);
  sweep.initial = semiclassical_initial(config);
  sweep.n_per_cell = config.n_traj;
  sweep.dt = config.dt;
  sweep.t_final = config.t_final;  // 0 = per-cell stationary default
  sweep.base_seed = config.base_seed;
  sweep.workers = config.workers;
  sweep.epsilon = config.epsilon;
  sweep.max_doublings = config.max_doublings;
  const PhaseDiagram diagram = phase_diagram_sweep(sweep);

  auto csv = sink.csv("phase_diagram.csv", config,
                      "h,gamma,p_plus,p_plus_err,unabsorbed_frac,M");
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t ih = 0; ih < diagram.h_grid.size(); ++ih) {
    for (std::size_t ig = 0; ig < diagram.gamma_grid.size(); ++ig) {
      const std::size_t cell = ih * diagram.gamma_grid.size() + ig;
      csv.row({diagram.h_grid[ih], diagram.gamma_grid[ig], diagram.p_plus[cell],
               diagram.p_plus_err[cell], diagram.unabsorbed_frac[cell],
               double(diagram.n_per_cell)});
      cells.push_back({{"h", diagram.h_grid[ih]},
                       {"gamma", diagram.gamma_grid[ig]},
                       {"seed_offset", cell * diagram.n_per_cell},
                       {"M", diagram.n_per_cell},
                       {"inconclusive", diagram.inconclusive[cell] != 0}});
    }
  }
  auto gc_csv = sink.csv("gamma_critical.csv", config,
                         "h,gamma_c_empirical,resolution,gamma_c_theory");
  for (std::size_t ih = 0; ih < diagram.h_grid.size(); ++ih) {
    std::vector<double> row(diagram.gamma_grid.size());
    for (std::size_t ig = 0; ig < row.size(); ++ig) {
      row[ig] = diagram.plus_frac[ih * diagram.gamma_grid.size() + ig];
    }
    const auto est =
        extract_gamma_critical(diagram.gamma_grid, row, diagram.n_per_cell);
    const auto theory = gamma_critical(diagram.h_grid[ih]);
    gc_csv.row({diagram.h_grid[ih],
                est.found ? est.gamma_c : std::numeric_limits<double>::quiet_NaN(),
                est.resolution, theory.value});
  }
  sink.diagnostics["cells"] = cells;
}

void cmd_flow(const RunConfig& config, ArtifactSink& sink) {
  const double t_final = resolved_t_final(config);
  const PhasePoint initial = semiclassical_initial(config);
  const FlowRecord rec =
      hamiltonian_flow(initial, config.h, t_final, config.dt, config.dt_record);
  auto csv = sink.csv("flow.csv", config, "t,mz,phi_unwrapped,energy");
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    csv.row({rec.times[k], rec.mz[k], rec.phi[k], rec.energy[k]});
  }
  const double e0 = hamiltonian_energy(initial, config.h);
  sink.diagnostics["energy"] = e0;
  switch (classify_orbit(make_energy_level(e0, config.h))) {
    case OrbitClass::Libration: sink.diagnostics["orbit_class"] = "libration"; break;
    case OrbitClass::Rotation: sink.diagnostics["orbit_class"] = "rotation"; break;
    case OrbitClass::Separatrix: sink.diagnostics["orbit_class"] = "separatrix"; break;
  }
  if (config.h > 0.0 && config.h < 1.0) {
    auto sep = sink.csv("separatrix.csv", config, "phi,mz");
    const auto phis = linspace(-M_PI, M_PI, 721);
    for (double phi : phis) {
      if (const auto mz = separatrix_mz(phi, config.h)) sep.row({phi, *mz});
    }
  }
}

void cmd_oracle(const RunConfig& config, ArtifactSink& sink) {
  // The pure-noise reduction is integrated directly in rescaled time
  // tau = gamma t (unit-strength noise), so dt and taus are tau quantities.
  if (config.taus.empty()) throw ConfigError("taus must be nonempty");
  const double tau_max = *std::max_element(config.taus.begin(), config.taus.end());
  const double tau_min = *std::min_element(config.taus.begin(), config.taus.end());

  SemiclassicalEnsembleConfig run;
  run.gamma = 1.0;
  run.initial = {config.mz0, 0.0};
  run.dt = config.dt;
  run.t_final = tau_max;
  run.dt_record = tau_min;
  run.n_trajectories = config.n_traj;
  run.base_seed = config.base_seed;
  run.workers = config.workers;
  run.large_gamma = true;
  run.max_doublings = std::max(config.max_doublings, 6);
  const auto ensemble = run_semiclassical_ensemble(run);

  auto fp_csv = sink.csv("fp_summary.csv", config,
                         "tau,ks_distance,n_samples,n_excluded");
  auto hist_csv = sink.csv("fp_hist.csv", config,
                           "tau,s_left,s_right,empirical_mass,analytic_mass");
  const auto& grid = ensemble.trajectories.front().times;
  nlohmann::json ks_list = nlohmann::json::array();
  for (double tau : config.taus) {
    std::size_t index = grid.size();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (std::abs(grid[k] - tau) < 1e-9) index = k;
    }
    if (index == grid.size()) {
      throw ConfigError("tau " + format_g17(tau) + " not on the record grid");
    }
    std::vector<double> s_samples;
    std::size_t excluded = 0;
    s_samples.reserve(ensemble.trajectories.size());
    for (const auto& traj : ensemble.trajectories) {
      const double mz = traj.mz[index];
      if (std::abs(mz) >= 1.0) {
        ++excluded;
        continue;
      }
      s_samples.push_back(std::atanh(mz));
    }
    const auto solution = make_fokker_planck(config.mz0, tau);
    const double ks = ks_distance_to_cdf(
        s_samples, [&](double s) { return solution.cdf(s); });
    fp_csv.row({tau, ks, double(s_samples.size()), double(excluded)});
    ks_list.push_back({{"tau", tau}, {"ks", ks}});

    const double s_lo = solution.s0 - tau - 6.0 * std::sqrt(tau);
    const double s_hi = solution.s0 + tau + 6.0 * std::sqrt(tau);
    const Histogram hist = histogram_of(s_samples, s_lo, s_hi, config.bins);
    for (std::size_t b = 0; b < hist.mass.size(); ++b) {
      const double left = hist.bin_left(b), right = hist.bin_right(b);
      const double analytic = solution.cdf(right) - solution.cdf(left);
      if (hist.mass[b] == 0.0 && analytic < 1e-12) continue;
      hist_csv.row({tau, left, right, hist.mass[b], analytic});
    }
  }
  sink.diagnostics["ks"] = ks_list;

  const auto summary = summarize_ensemble(ensemble.trajectories, config.epsilon,
                                          config.bins);
  write_semiclassical_summary(config, sink, summary);
  sink.diagnostics["t_final_used"] = ensemble.t_final_used;
  sink.diagnostics["doublings"] = ensemble.doublings;
  sink.diagnostics["fokker_planck_p_plus"] = fokker_planck_p_plus(config.mz0);
}

const char* plot_script_source(const std::string& subcommand) {
  if (subcommand == "sweep") {
    return R"(import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

data = np.genfromtxt("phase_diagram.csv", delimiter=",", names=True, comments="#")
h = np.unique(data["h"]); g = np.unique(data["gamma"])
p = data["p_plus"].reshape(len(h), len(g))
plt.pcolormesh(h, g, p.T, shading="nearest", cmap="magma", vmin=0, vmax=1)
hh = np.linspace(0, 1, 256)
plt.plot(hh, 2*np.sqrt(hh*(1-hh)), "w-", lw=1.5)
plt.xlabel("h"); plt.ylabel("gamma"); plt.colorbar(label="p_plus")
plt.yscale("log")
plt.savefig("phase_diagram.png", dpi=150, bbox_inches="tight")
)";
  }
  return R"(import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import glob

for name in glob.glob("*.csv"):
    data = np.genfromtxt(name, delimiter=",", names=True, comments="#")
    if data.dtype.names is None or len(data.dtype.names) < 2:
        continue
    t = data[data.dtype.names[0]]
    plt.figure()
    for col in data.dtype.names[1:]:
        plt.plot(t, data[col], label=col)
    plt.xlabel(data.dtype.names[0]); plt.legend(); plt.title(name)
    plt.savefig(name.replace(".csv", ".png"), dpi=150, bbox_inches="tight")
)";
}

}  // namespace

RunConfig parse_cli(const std::vector<std::string>& args) {
  RunConfig config;
  CLI::App app{"Monitored LMG model simulator"};
  app.set_help_flag("--help", "print usage");  // frees -h/--h for the field
  app.set_config("--config", "", "flat key=value configuration file");
  app.allow_config_extras(false);

  app.add_option("--h", config.h, "transverse field");
  app.add_option("--gamma", config.gamma, "measurement strength");
  app.add_option("--N", config.n_particles,
                 "particle count; 0 selects the semiclassical model");
  app.add_option("--theta", config.theta, "coherent-state polar angle");
  app.add_option("--phi0", config.phi0, "initial azimuth");
  app.add_option("--mz0", config.mz0, "initial m_z (semiclassical)");
  app.add_option("--dt", config.dt, "integration step");
  app.add_option("--t-final", config.t_final, "final time; 0 = subcommand default");
  app.add_option("--dt-record", config.dt_record, "record grid spacing");
  app.add_option("--lindblad-dt", config.lindblad_dt,
                 "density-matrix RK4 step; 0 = stability bound");
  app.add_option("--M", config.n_traj, "number of trajectories");
  app.add_option("--seed", config.base_seed, "base seed");
  app.add_option("--workers", config.workers,
                 "worker threads; 0 = LMG_WORKERS or hardware");
  app.add_option("--epsilon", config.epsilon, "soft absorption threshold");
  app.add_option("--bins", config.bins, "histogram bins");
  app.add_option("--ehrenfest-threshold", config.ehrenfest_threshold,
                 "crossing threshold for t*");
  app.add_option("--max-doublings", config.max_doublings,
                 "t_final doublings for stationary estimates");
  app.add_option("--h-min", config.h_min, "sweep h grid start");
  app.add_option("--h-max", config.h_max, "sweep h grid end");
  app.add_option("--h-count", config.h_count, "sweep h grid size");
  app.add_option("--gamma-min", config.gamma_min, "sweep gamma grid start");
  app.add_option("--gamma-max", config.gamma_max, "sweep gamma grid end");
  app.add_option("--gamma-count", config.gamma_count, "sweep gamma grid size");
  app.add_flag("--gamma-log,!--gamma-linear", config.gamma_log,
               "logarithmic gamma grid");
  app.add_option("--taus", config.taus, "rescaled times for the oracle checks")
      ->delimiter(',');
  app.add_option("--outdir", config.outdir, "output directory");
  app.add_flag("--plot-script", config.plot_script, "emit a plot script");

  static const std::vector<std::string> kSubcommands = {
      "trajectory", "ensemble", "lindblad", "compare", "sweep", "flow", "oracle"};
  for (const auto& name : kSubcommands) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
  }
  app.require_subcommand(1);

  std::vector<const char*> argv;
  argv.push_back("lmgsim");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  config.subcommand = app.get_subcommands().front()->get_name();
  validate_config(config);
  return config;
}

void validate_config(const RunConfig& config) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  require(std::isfinite(config.h), "h must be finite");
  require(std::isfinite(config.gamma) && config.gamma >= 0.0,
          "gamma must be finite and >= 0");
  require(config.n_particles >= 0, "N must be >= 0");
  require(config.theta >= 0.0 && config.theta <= M_PI, "theta must be in [0, pi]");
  require(std::abs(config.mz0) <= 1.0, "mz0 must be in [-1, 1]");
  require(config.dt > 0.0, "dt must be > 0");
  require(config.dt < config.dt_record, "need dt < dt_record");
  require(config.t_final >= 0.0, "t_final must be >= 0");
  if (config.t_final > 0.0) {
    require(config.dt_record <= config.t_final, "need dt_record <= t_final");
  }
  require(config.n_traj >= 1, "M must be >= 1");
  require(config.epsilon > 0.0 && config.epsilon < 1.0,
          "epsilon must be in (0, 1)");
  require(config.bins >= 1, "bins must be >= 1");
  require(config.max_doublings >= 0, "max-doublings must be >= 0");
  require(config.h_count >= 1 && config.gamma_count >= 1,
          "grid counts must be >= 1");
  require(config.h_min <= config.h_max, "need h-min <= h-max");
  require(config.gamma_min <= config.gamma_max, "need gamma-min <= gamma-max");
  if (config.gamma_log) {
    require(config.gamma_min > 0.0, "gamma-min must be > 0 on a log grid");
  }
  for (double tau : config.taus) require(tau > 0.0, "taus must be > 0");
}

nlohmann::json config_to_json(const RunConfig& c) {
  return nlohmann::json{{"subcommand", c.subcommand},
                        {"h", c.h},
                        {"gamma", c.gamma},
                        {"N", c.n_particles},
                        {"theta", c.theta},
                        {"phi0", c.phi0},
                        {"mz0", c.mz0},
                        {"dt", c.dt},
                        {"t_final", c.t_final},
                        {"dt_record", c.dt_record},
                        {"lindblad_dt", c.lindblad_dt},
                        {"M", c.n_traj},
                        {"seed", c.base_seed},
                        {"workers", c.workers},
                        {"epsilon", c.epsilon},
                        {"bins", c.bins},
                        {"ehrenfest_threshold", c.ehrenfest_threshold},
                        {"max_doublings", c.max_doublings},
                        {"h_min", c.h_min},
                        {"h_max", c.h_max},
                        {"h_count", c.h_count},
                        {"gamma_min", c.gamma_min},
                        {"gamma_max", c.gamma_max},
                        {"gamma_count", c.gamma_count},
                        {"gamma_log", c.gamma_log},
                        {"taus", c.taus},
                        {"outdir", c.outdir},
                        {"plot_script", c.plot_script}};
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.subcommand = j.at("subcommand").get<std::string>();
  c.h = j.at("h").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.n_particles = j.at("N").get<int>();
  c.theta = j.at("theta").get<double>();
  c.phi0 = j.at("phi0").get<double>();
  c.mz0 = j.at("mz0").get<double>();
  c.dt = j.at("dt").get<double>();
  c.t_final = j.at("t_final").get<double>();
  c.dt_record = j.at("dt_record").get<double>();
  c.lindblad_dt = j.at("lindblad_dt").get<double>();
  c.n_traj = j.at("M").get<std::uint64_t>();
  c.base_seed = j.at("seed").get<std::uint64_t>();
  c.workers = j.at("workers").get<std::uint64_t>();
  c.epsilon = j.at("epsilon").get<double>();
  c.bins = j.at("bins").get<int>();
  c.ehrenfest_threshold = j.at("ehrenfest_threshold").get<double>();
  c.max_doublings = j.at("max_doublings").get<int>();
  c.h_min = j.at("h_min").get<double>();
  c.h_max = j.at("h_max").get<double>();
  c.h_count = j.at("h_count").get<int>();
  c.gamma_min = j.at("gamma_min").get<double>();
  c.gamma_max = j.at("gamma_max").get<double>();
  c.gamma_count = j.at("gamma_count").get<int>();
  c.gamma_log = j.at("gamma_log").get<bool>();
  c.taus = j.at("taus").get<std::vector<double>>();
  c.outdir = j.at("outdir").get<std::string>();
  c.plot_script = j.at("plot_script").get<bool>();
  return c;
}

void run_subcommand(const RunConfig& config) {
  ArtifactSink sink(config.outdir);
  const auto start = std::chrono::steady_clock::now();
  try {
    if (config.subcommand == "trajectory") {
      cmd_trajectory(config, sink);
    } else if (config.subcommand == "ensemble") {
      cmd_ensemble(config, sink);
    } else if (config.subcommand == "lindblad") {
      cmd_lindblad(config, sink);
    } else if (config.subcommand == "compare") {
      cmd_compare(config, sink);
    } else if (config.subcommand == "sweep") {
      cmd_sweep(config, sink);
    } else if (config.subcommand == "flow") {
      cmd_flow(config, sink);
    } else if (config.subcommand == "oracle") {
      cmd_oracle(config, sink);
    } else {
      throw ConfigError("unknown subcommand: " + config.subcommand);
    }
  } catch (const std::exception& e) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    write_manifest(sink, config, "error", wall, e.what());
    throw;
  }
  if (config.plot_script) {
    sink.plain_file("plot.py", plot_script_source(config.subcommand));
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_manifest(sink, config, "ok", wall);
}

int run_cli(const std::vector<std::string>& args) {
  auto emit_error = [](const std::string& type, const std::string& message) {
    nlohmann::json j{{"status", "error"}, {"type", type}, {"message", message}};
    std::cerr << j.dump() << "\n";
  };
  try {
    const RunConfig config = parse_cli(args);
    run_subcommand(config);
    return 0;
  } catch (const ConfigError& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const InconclusiveError& e) {
    emit_error("inconclusive", e.what());
    return 4;
  } catch (const SolverError& e) {
    emit_error("solver", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 3;
  }
}

}  // namespace lmg
