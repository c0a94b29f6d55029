#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace lmg {

// Fully resolved run configuration. Flags override config-file values;
// unknown keys are rejected.
struct RunConfig {
  std::string subcommand;

  // model
  double h = 0.3;
  double gamma = 0.25;
  int n_particles = 0;  // 0 selects the semiclassical model where allowed

  // initial condition
  double theta = M_PI / 2;  // quantum coherent-state angles
  double phi0 = 0.0;
  double mz0 = 0.0;  // semiclassical chart

  // integration
  double dt = 1e-3;
  double t_final = 10.0;
  double dt_record = 1e-2;
  double lindblad_dt = 0.0;  // 0: automatic stability-bounded step

  // ensemble
  std::uint64_t n_traj = 1000;
  std::uint64_t base_seed = 12345;
  std::uint64_t workers = 0;  // 0: LMG_WORKERS env or hardware concurrency

  // analysis
  double epsilon = 1e-4;
  int bins = 201;
  double ehrenfest_threshold = -0.9;
  int max_doublings = 3;

  // sweep grids
  double h_min = 0.05, h_max = 0.95;
  int h_count = 8;
  double gamma_min = 0.05, gamma_max = 1.5;
  int gamma_count = 10;
  bool gamma_log = true;

  // oracle
  std::vector<double> taus{0.5, 1.0, 2.0};

  // output
  std::string outdir = "out";
  bool plot_script = false;
};

// Parses command line (and optional --config file). Throws ConfigError on
// unknown keys or invariant violations, naming the offending key.
RunConfig parse_cli(const std::vector<std::string>& args);

void validate_config(const RunConfig& config);

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

// Executes the configured subcommand, writing CSV artifacts plus a JSON
// manifest into config.outdir. Throws on failure; the caller maps
// exception types to exit codes.
void run_subcommand(const RunConfig& config);

// Entry point used by the binary: returns the process exit code
// (0 ok, 2 config error, 3 solver failure, 4 inconclusive run) and emits a
// machine-readable error JSON on failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace lmg
