#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmg/cli.hpp"
#include "lmg/errors.hpp"

using namespace lmg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lmgsim_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("defaults parse and flags override the config file") {
  const fs::path dir = fresh_dir("cfg");
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "gamma=0.1\n";
    out << "M=5\n";
  }
  const auto config = parse_cli(
      {"trajectory", "--config", cfg.string(), "--gamma=0.25"});
  CHECK(config.subcommand == "trajectory");
  CHECK(config.gamma == doctest::Approx(0.25));  // flag wins
  CHECK(config.n_traj == 5);                     // file applies
}

TEST_CASE("unknown config keys are rejected, message names the key") {
  const fs::path dir = fresh_dir("badcfg");
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "gamm=0.1\n";
  }
  CHECK_THROWS_AS(parse_cli({"trajectory", "--config", cfg.string()}), ConfigError);
  try {
    parse_cli({"trajectory", "--config", cfg.string()});
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("gamm") != std::string::npos);
  }
}

TEST_CASE("invariant violations name the offending key") {
  CHECK_THROWS_AS(parse_cli({"trajectory", "--gamma=-1"}), ConfigError);
  try {
    parse_cli({"trajectory", "--gamma=-1"});
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_cli({"trajectory", "--dt=0.5", "--dt-record=0.1"}),
                  ConfigError);
  CHECK_THROWS_AS(parse_cli({"trajectory", "--M=0"}), ConfigError);
  CHECK_THROWS_AS(parse_cli({}), ConfigError);
}

TEST_CASE("config json round-trips") {
  auto config = parse_cli({"sweep", "--h-min=0.1", "--h-max=0.5", "--h-count=3",
                           "--gamma-min=0.2", "--gamma-max=0.9",
                           "--gamma-count=4", "--M=17", "--seed=999"});
  const auto j = config_to_json(config);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.n_traj == 17);
  CHECK(back.base_seed == 999);
  CHECK(back.h_count == 3);
}

TEST_CASE("run_cli maps error classes to exit codes") {
  CHECK(run_cli({"trajectory", "--gamma=-2"}) == 2);
  CHECK(run_cli({"nonsense"}) == 2);
}

TEST_CASE("trajectory subcommand writes csv and manifest") {
  const fs::path dir = fresh_dir("traj");
  const int code = run_cli({"trajectory", "--N=4", "--gamma=0.1", "--h=0.5",
                            "--t-final=0.5", "--dt=0.001", "--dt-record=0.1",
                            "--outdir", dir.string()});
  CHECK(code == 0);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["status"] == "ok");
  // The manifest references every artifact.
  bool found = false;
  for (const auto& f : manifest["files"]) {
    if (f.get<std::string>() == "trajectory.csv") found = true;
    CHECK(fs::exists(dir / f.get<std::string>()));
  }
  CHECK(found);
  // Header carries the rng identifier and seed.
  const std::string csv = slurp(dir / "trajectory.csv");
  CHECK(csv.find("# rng=philox4x32-10/box-muller base_seed=12345") !=
        std::string::npos);
  // Config echo round-trips through the manifest.
  const auto echoed = config_from_json(manifest["config"]);
  CHECK(config_to_json(echoed) == manifest["config"]);
}

TEST_CASE("identical runs are byte-identical regardless of worker count") {
  const fs::path dir1 = fresh_dir("det1");
  const fs::path dir2 = fresh_dir("det2");
  const std::vector<std::string> base{
      "ensemble", "--N=0",        "--h=0.3",       "--gamma=1.0", "--mz0=0.0",
      "--M=50",   "--seed=777",   "--t-final=5",   "--dt=0.001",  "--dt-record=1",
  };
  auto args1 = base;
  args1.push_back("--workers=1");
  args1.push_back("--outdir");
  args1.push_back(dir1.string());
  auto args2 = base;
  args2.push_back("--workers=3");
  args2.push_back("--outdir");
  args2.push_back(dir2.string());
  CHECK(run_cli(args1) == 0);
  CHECK(run_cli(args2) == 0);
  CHECK(slurp(dir1 / "summary.csv") == slurp(dir2 / "summary.csv"));
  CHECK(slurp(dir1 / "histogram.csv") == slurp(dir2 / "histogram.csv"));
}

TEST_CASE("sweep produces a phase diagram and gamma_c estimates") {
  const fs::path dir = fresh_dir("sweep");
  const int code = run_cli({"sweep", "--h-min=0.3", "--h-max=0.3", "--h-count=1",
                            "--gamma-min=0.4", "--gamma-max=1.6",
                            "--gamma-count=4", "--M=200", "--seed=5",
                            "--t-final=0", "--dt=0.002", "--dt-record=0.02",
                            "--max-doublings=2", "--outdir", dir.string()});
  CHECK(code == 0);
  CHECK(fs::exists(dir / "phase_diagram.csv"));
  CHECK(fs::exists(dir / "gamma_critical.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["diagnostics"]["cells"].size() == 4);
  CHECK(manifest["diagnostics"]["cells"][1]["seed_offset"] == 200);
}

TEST_CASE("flow subcommand emits separatrix samples for h < 1") {
  const fs::path dir = fresh_dir("flow");
  const int code =
      run_cli({"flow", "--h=0.3", "--mz0=0.3", "--phi0=0.0", "--t-final=2",
               "--dt=0.0005", "--dt-record=0.1", "--outdir", dir.string()});
  CHECK(code == 0);
  CHECK(fs::exists(dir / "flow.csv"));
  CHECK(fs::exists(dir / "separatrix.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["diagnostics"]["orbit_class"] == "libration");
}

TEST_CASE("failed runs exit nonzero and leave an error manifest") {
  const fs::path dir = fresh_dir("fail");
  // dt far above the Lindblad stability bound trips the trace-drift guard.
  const int code = run_cli({"lindblad", "--N=16", "--gamma=2.0", "--h=0.5",
                            "--t-final=1", "--dt=0.001", "--dt-record=0.5",
                            "--lindblad-dt=0.5", "--outdir", dir.string()});
  CHECK(code == 3);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["status"] == "error");
}
