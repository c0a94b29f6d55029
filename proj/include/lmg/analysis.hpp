#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "lmg/monitored_quantum.hpp"
#include "lmg/semiclassical.hpp"

namespace lmg {

// --- small numeric helpers -------------------------------------------------

// Pairwise (cascade) sum in index order: reduction result is independent of
// the thread layout that produced the values.
double pairwise_sum(const std::vector<double>& values);

// Jackknife standard error of the mean (leave-one-out).
double jackknife_se(const std::vector<double>& values);

// --- ensemble statistics ----------------------------------------------------

struct Histogram {
  double lo = -1.0, hi = 1.0;
  std::vector<double> mass;  // sums to 1
  double bin_left(std::size_t i) const;
  double bin_right(std::size_t i) const;
};
Histogram histogram_of(const std::vector<double>& values, double lo, double hi,
                       int n_bins);

struct EnsembleSummary {
  std::vector<double> times;
  std::vector<double> mean_mz, var_mz, se_mz;
  std::vector<Histogram> hist_mz;
  std::size_t n_plus = 0, n_minus = 0, n_unabsorbed = 0, n_traj = 0;
  double epsilon = 1e-4;   // soft convergence threshold used
  double t_classify = 0.0; // time at which the two-level rule was applied
  double final_mean_mz = 0.0, final_se_mz = 0.0;  // over states at t_classify
};

// Means/variances/histograms on the common record grid plus absorption
// counts. Classification is two level: hard absorption (clamped at the
// barrier) or, at the end of the run, 1 - |m_z| < epsilon.
EnsembleSummary summarize_ensemble(const std::vector<SemiclassicalTrajectory>& trajectories,
                                   double epsilon = 1e-4, int n_bins = 201);

struct PPlusEstimate {
  double value = 0.0;        // fraction absorbed at +1 among absorbed
  double stderr_value = 0.0; // binomial
  double mean_based = 0.0;   // (1 + mean mz(t_final)) / 2
  double mean_based_stderr = 0.0;
  double unabsorbed_fraction = 0.0;
};

// Throws InconclusiveError when more than 5% of trajectories are unabsorbed.
PPlusEstimate p_plus(const EnsembleSummary& summary);

// --- phase diagram -----------------------------------------------------------

struct GammaCritical {
  double value = 0.0;
  bool in_range = false;  // false outside h in [0, 1]: no transition
};
GammaCritical gamma_critical(double h);

struct SemiclassicalEnsembleConfig {
  double h = 0.0;
  double gamma = 0.0;
  PhasePoint initial{0.0, 0.0};
  double dt = 1e-3;
  double t_final = 0.0;    // <= 0: max(50, 20/gamma)
  double dt_record = 0.0;  // <= 0: t_final / 50
  std::size_t n_trajectories = 1000;
  std::uint64_t base_seed = 0;
  std::uint64_t trajectory_offset = 0;
  std::size_t workers = 0;
  bool large_gamma = false;  // integrate the pure-noise reduction instead
  double unabsorbed_target = 0.01;
  int max_doublings = 3;
};

struct SemiclassicalEnsemble {
  std::vector<SemiclassicalTrajectory> trajectories;
  double t_final_used = 0.0;
  int doublings = 0;
};

// Independent trajectories, one NoiseStream per index; t_final doubles (up
// to max_doublings) until fewer than unabsorbed_target remain unconverged.
// Bit-identical results for any worker count.
SemiclassicalEnsemble run_semiclassical_ensemble(const SemiclassicalEnsembleConfig& config);

struct PhaseDiagram {
  std::vector<double> h_grid, gamma_grid;
  // Row-major cells [ih * gamma_grid.size() + ig].
  std::vector<double> p_plus, p_plus_err, unabsorbed_frac;
  std::vector<double> plus_frac;  // n_plus / M, conservative detector input
  std::vector<int> inconclusive;  // cells where unabsorbed fraction > 5%
  std::size_t n_per_cell = 0;
  double t_final = 0.0, dt = 0.0;
  std::uint64_t base_seed = 0;
};

struct SweepConfig {
  std::vector<double> h_grid, gamma_grid;
  PhasePoint initial{0.0, 0.0};
  std::size_t n_per_cell = 1000;
  double dt = 1e-3;
  double t_final = 0.0;  // <= 0: per-cell default
  std::uint64_t base_seed = 0;
  std::size_t workers = 0;
  double epsilon = 1e-4;
  double unabsorbed_target = 0.01;
  int max_doublings = 3;
};

PhaseDiagram phase_diagram_sweep(const SweepConfig& config);

struct GammaCriticalEstimate {
  double gamma_c = 0.0;
  double resolution = 0.0;  // grid spacing at the detection point
  std::size_t index = 0;
  bool found = false;
};

// First gamma on the scan where the +1 absorption fraction exceeds 0.05
// with 95% confidence. Uses the conservative count n_plus / M so cells
// with residual unabsorbed trajectories cannot mask a detection.
GammaCriticalEstimate extract_gamma_critical(const std::vector<double>& gamma_grid,
                                             const std::vector<double>& plus_frac,
                                             std::size_t n_per_cell);

// --- quantum ensembles ---------------------------------------------------------

// Independent SSE trajectories, one NoiseStream per index, merged by index.
std::vector<TrajectoryRecord> run_sse_ensemble(const ModelSpec& model,
                                               const PureState& initial,
                                               double t_final, double dt,
                                               double dt_record,
                                               std::uint64_t base_seed,
                                               std::size_t n_trajectories,
                                               std::size_t workers,
                                               std::uint64_t trajectory_offset = 0);

struct QuantumEnsembleSummary {
  std::vector<double> times;
  std::vector<double> mean_mx, mean_my, mean_mz, mean_mz2;
  std::vector<double> var_mz, se_mz;
  std::vector<Histogram> hist_mz;
  double mean_norm_drift = 0.0;  // across trajectories, at the final time
  std::size_t n_traj = 0;
};
QuantumEnsembleSummary summarize_quantum_ensemble(
    const std::vector<TrajectoryRecord>& trajectories, int n_bins = 201);

// --- time-series diagnostics -------------------------------------------------

// First time the candidate series crosses the threshold moving away from
// the side the reference starts on; linear interpolation between samples.
std::optional<double> crossing_time(const std::vector<double>& times,
                                    const std::vector<double>& reference,
                                    const std::vector<double>& candidate,
                                    double threshold);

// Per-trajectory factorization gap <m_z^2> - <m_z>^2.
std::vector<double> factorization_gap(const TrajectoryRecord& record);

struct FactorizationComparison {
  std::vector<double> times;
  std::vector<double> trajectory_mean_gap;  // averaged per-trajectory gap
  std::vector<double> lindblad_gap;         // <m_z^2>_rho - <m_z>_rho^2
};
FactorizationComparison factorization_comparison(
    const std::vector<TrajectoryRecord>& trajectories, const DensityRecord& rho);

// --- large-gamma Fokker-Planck oracle ----------------------------------------

// Analytic distribution of s = artanh(m_z) at rescaled time tau = gamma t:
// two counter-propagating Gaussians weighted by the initial condition.
struct FokkerPlanckSolution {
  double s0 = 0.0;
  double tau = 0.0;
  double density(double s) const;
  double cdf(double s) const;
};
FokkerPlanckSolution make_fokker_planck(double mz0, double tau);

// Stationary absorption probability (1 + mz0) / 2 for |mz0| < 1.
double fokker_planck_p_plus(double mz0);

// --- Kolmogorov-Smirnov ------------------------------------------------------

double ks_distance_to_cdf(std::vector<double> samples,
                          const std::function<double(double)>& cdf);

struct KsTwoSampleResult {
  double statistic = 0.0;
  double p_value = 0.0;
};
KsTwoSampleResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace lmg
