#include "lmg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmg/errors.hpp"
#include "lmg/parallel.hpp"

namespace lmg {

namespace {

double pairwise_sum_range(const double* data, std::size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, n - half);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 l^2}.
double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

double pairwise_sum(const std::vector<double>& values) {
  return pairwise_sum_range(values.data(), values.size());
}

double jackknife_se(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double total = pairwise_sum(values);
  const double mean = total / double(n);
  // theta_i = (total - x_i) / (n - 1); SE^2 = (n-1)/n * sum (theta_i - theta_bar)^2
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = (total - values[i]) / double(n - 1);
    sq[i] = (theta - mean) * (theta - mean);
  }
  return std::sqrt((double(n) - 1.0) / double(n) * pairwise_sum(sq));
}

double Histogram::bin_left(std::size_t i) const {
  return lo + (hi - lo) * double(i) / double(mass.size());
}
double Histogram::bin_right(std::size_t i) const {
  return lo + (hi - lo) * double(i + 1) / double(mass.size());
}

Histogram histogram_of(const std::vector<double>& values, double lo, double hi,
                       int n_bins) {
  if (n_bins < 1 || hi <= lo) throw ConfigError("bad histogram specification");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.mass.assign(std::size_t(n_bins), 0.0);
  if (values.empty()) return h;
  const double w = double(n_bins) / (hi - lo);
  const double unit = 1.0 / double(values.size());
  for (double v : values) {
    auto bin = std::ptrdiff_t((v - lo) * w);
    bin = std::clamp<std::ptrdiff_t>(bin, 0, n_bins - 1);
    h.mass[std::size_t(bin)] += unit;
  }
  return h;
}

namespace {

struct Classification {
  Absorption final_state;
};

Classification classify(const SemiclassicalTrajectory& traj, double epsilon) {
  if (traj.absorbed != Absorption::None) return {traj.absorbed};
  if (1.0 - std::abs(traj.mz_end) < epsilon) {
    return {traj.mz_end > 0.0 ? Absorption::Plus : Absorption::Minus};
  }
  return {Absorption::None};
}

}  // namespace

EnsembleSummary summarize_ensemble(
    const std::vector<SemiclassicalTrajectory>& trajectories, double epsilon,
    int n_bins) {
  if (trajectories.empty()) throw ConfigError("empty trajectory set");
  const auto& grid = trajectories.front().times;
  for (const auto& t : trajectories) {
    if (t.times.size() != grid.size()) {
      throw ConfigError("trajectories do not share a common record grid");
    }
  }

  EnsembleSummary s;
  s.times = grid;
  s.epsilon = epsilon;
  s.n_traj = trajectories.size();
  s.t_classify = trajectories.front().t_end;

  const std::size_t n_times = grid.size();
  const std::size_t m = trajectories.size();
  std::vector<double> column(m), sq(m);
  s.mean_mz.resize(n_times);
  s.var_mz.resize(n_times);
  s.se_mz.resize(n_times);
  s.hist_mz.reserve(n_times);
  for (std::size_t k = 0; k < n_times; ++k) {
    for (std::size_t i = 0; i < m; ++i) column[i] = trajectories[i].mz[k];
    const double mean = pairwise_sum(column) / double(m);
    for (std::size_t i = 0; i < m; ++i) sq[i] = (column[i] - mean) * (column[i] - mean);
    const double var = m > 1 ? pairwise_sum(sq) / double(m - 1) : 0.0;
    s.mean_mz[k] = mean;
    s.var_mz[k] = var;
    s.se_mz[k] = jackknife_se(column);
    s.hist_mz.push_back(histogram_of(column, -1.0, 1.0, n_bins));
  }

  for (std::size_t i = 0; i < m; ++i) {
    column[i] = trajectories[i].mz_end;
    switch (classify(trajectories[i], epsilon).final_state) {
      case Absorption::Plus: ++s.n_plus; break;
      case Absorption::Minus: ++s.n_minus; break;
      case Absorption::None: ++s.n_unabsorbed; break;
    }
  }
  s.final_mean_mz = pairwise_sum(column) / double(m);
  s.final_se_mz = jackknife_se(column);
  return s;
}

PPlusEstimate p_plus(const EnsembleSummary& summary) {
  PPlusEstimate est;
  est.unabsorbed_fraction = double(summary.n_unabsorbed) / double(summary.n_traj);
  if (est.unabsorbed_fraction > 0.05) {
    throw InconclusiveError("unabsorbed fraction exceeds 5%; extend t_final",
                            est.unabsorbed_fraction);
  }
  const double absorbed = double(summary.n_plus + summary.n_minus);
  est.value = double(summary.n_plus) / absorbed;
  est.stderr_value = std::sqrt(est.value * (1.0 - est.value) / absorbed);
  est.mean_based = 0.5 * (1.0 + summary.final_mean_mz);
  est.mean_based_stderr = 0.5 * summary.final_se_mz;
  return est;
}

GammaCritical gamma_critical(double h) {
  if (h < 0.0 || h > 1.0) return {0.0, false};
  return {2.0 * std::sqrt(h * (1.0 - h)), true};
}

SemiclassicalEnsemble run_semiclassical_ensemble(
    const SemiclassicalEnsembleConfig& config) {
  if (config.n_trajectories < 1) throw ConfigError("need at least one trajectory");
  const double t0 = config.t_final > 0.0
                        ? config.t_final
                        : std::max(50.0, 20.0 / std::max(config.gamma, 1e-12));
  const double dt_record = config.dt_record > 0.0 ? config.dt_record : t0 / 50.0;

  SemiclassicalEnsemble out;
  out.trajectories.resize(config.n_trajectories);
  std::vector<NoiseStream> streams;
  streams.reserve(config.n_trajectories);
  for (std::size_t i = 0; i < config.n_trajectories; ++i) {
    streams.emplace_back(config.base_seed, config.trajectory_offset + i);
  }

  parallel_for_index(config.n_trajectories, config.workers, [&](std::size_t i) {
    if (config.large_gamma) {
      out.trajectories[i] = simulate_large_gamma(config.initial.mz, config.gamma, t0,
                                                 config.dt, dt_record, streams[i]);
    } else {
      out.trajectories[i] = simulate_trajectory(config.initial, config.h, config.gamma,
                                                t0, config.dt, dt_record, streams[i]);
    }
  });

  out.t_final_used = t0;
  auto unconverged_count = [&] {
    std::size_t n = 0;
    for (const auto& t : out.trajectories) {
      if (classify(t, 1e-4).final_state == Absorption::None) ++n;
    }
    return n;
  };

  while (out.doublings < config.max_doublings &&
         double(unconverged_count()) >
             config.unabsorbed_target * double(config.n_trajectories)) {
    const double t_next = 2.0 * out.t_final_used;
    parallel_for_index(config.n_trajectories, config.workers, [&](std::size_t i) {
      auto& traj = out.trajectories[i];
      if (traj.absorbed != Absorption::None) {
        traj.t_end = t_next;
        return;
      }
      if (config.large_gamma) {
        extend_large_gamma(traj, config.gamma, t_next, config.dt, streams[i]);
      } else {
        extend_trajectory(traj, config.h, config.gamma, t_next, config.dt, streams[i]);
      }
    });
    out.t_final_used = t_next;
    ++out.doublings;
  }
  return out;
}

PhaseDiagram phase_diagram_sweep(const SweepConfig& config) {
  if (config.h_grid.empty() || config.gamma_grid.empty()) {
    throw ConfigError("sweep grids must be nonempty");
  }
  PhaseDiagram diagram;
  diagram.h_grid = config.h_grid;
  diagram.gamma_grid = config.gamma_grid;
  diagram.n_per_cell = config.n_per_cell;
  diagram.dt = config.dt;
  diagram.t_final = config.t_final;
  diagram.base_seed = config.base_seed;
  const std::size_t n_cells = config.h_grid.size() * config.gamma_grid.size();
  diagram.p_plus.assign(n_cells, std::numeric_limits<double>::quiet_NaN());
  diagram.p_plus_err.assign(n_cells, 0.0);
  diagram.unabsorbed_frac.assign(n_cells, 0.0);
  diagram.plus_frac.assign(n_cells, 0.0);
  diagram.inconclusive.assign(n_cells, 0);

  for (std::size_t ih = 0; ih < config.h_grid.size(); ++ih) {
    for (std::size_t ig = 0; ig < config.gamma_grid.size(); ++ig) {
      const std::size_t cell = ih * config.gamma_grid.size() + ig;
      SemiclassicalEnsembleConfig run;
      run.h = config.h_grid[ih];
      run.gamma = config.gamma_grid[ig];
      run.initial = config.initial;
      run.dt = config.dt;
      run.t_final = config.t_final;
      run.n_trajectories = config.n_per_cell;
      run.base_seed = config.base_seed;
      run.trajectory_offset = cell * config.n_per_cell;
      run.workers = config.workers;
      run.unabsorbed_target = config.unabsorbed_target;
      run.max_doublings = config.max_doublings;
      const auto ensemble = run_semiclassical_ensemble(run);

      std::size_t n_plus = 0, n_minus = 0;
      for (const auto& traj : ensemble.trajectories) {
        switch (classify(traj, config.epsilon).final_state) {
          case Absorption::Plus: ++n_plus; break;
          case Absorption::Minus: ++n_minus; break;
          case Absorption::None: break;
        }
      }
      const double m = double(config.n_per_cell);
      const double unabsorbed = m - double(n_plus + n_minus);
      diagram.unabsorbed_frac[cell] = unabsorbed / m;
      diagram.plus_frac[cell] = double(n_plus) / m;
      if (unabsorbed / m > 0.05) {
        diagram.inconclusive[cell] = 1;
      } else {
        const double absorbed = double(n_plus + n_minus);
        const double p = double(n_plus) / absorbed;
        diagram.p_plus[cell] = p;
        diagram.p_plus_err[cell] = std::sqrt(p * (1.0 - p) / absorbed);
      }
    }
  }
  return diagram;
}

GammaCriticalEstimate extract_gamma_critical(const std::vector<double>& gamma_grid,
                                             const std::vector<double>& plus_frac,
                                             std::size_t n_per_cell) {
  if (gamma_grid.size() != plus_frac.size()) throw ConfigError("grid size mismatch");
  GammaCriticalEstimate est;
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    const double p = plus_frac[i];
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / double(n_per_cell));
    if (p - 1.96 * se > 0.05) {
      est.gamma_c = gamma_grid[i];
      est.resolution = i > 0 ? gamma_grid[i] - gamma_grid[i - 1]
                             : (gamma_grid.size() > 1 ? gamma_grid[1] - gamma_grid[0]
                                                      : gamma_grid[i]);
      est.index = i;
      est.found = true;
      return est;
    }
  }
  return est;
}

std::vector<TrajectoryRecord> run_sse_ensemble(const ModelSpec& model,
                                               const PureState& initial,
                                               double t_final, double dt,
                                               double dt_record,
                                               std::uint64_t base_seed,
                                               std::size_t n_trajectories,
                                               std::size_t workers,
                                               std::uint64_t trajectory_offset) {
  std::vector<TrajectoryRecord> records(n_trajectories);
  parallel_for_index(n_trajectories, workers, [&](std::size_t i) {
    NoiseStream noise(base_seed, trajectory_offset + i);
    records[i] = sse_trajectory(model, initial, t_final, dt, dt_record, noise);
  });
  return records;
}

QuantumEnsembleSummary summarize_quantum_ensemble(
    const std::vector<TrajectoryRecord>& trajectories, int n_bins) {
  if (trajectories.empty()) throw ConfigError("empty trajectory set");
  const auto& grid = trajectories.front().times;
  for (const auto& t : trajectories) {
    if (t.times.size() != grid.size()) {
      throw ConfigError("trajectories do not share a common record grid");
    }
  }
  QuantumEnsembleSummary s;
  s.times = grid;
  s.n_traj = trajectories.size();
  const std::size_t m = trajectories.size();
  const std::size_t n_times = grid.size();
  std::vector<double> column(m), sq(m);
  auto mean_of = [&](auto accessor) {
    for (std::size_t i = 0; i < m; ++i) column[i] = accessor(trajectories[i]);
    return pairwise_sum(column) / double(m);
  };
  s.mean_mx.resize(n_times);
  s.mean_my.resize(n_times);
  s.mean_mz.resize(n_times);
  s.mean_mz2.resize(n_times);
  s.var_mz.resize(n_times);
  s.se_mz.resize(n_times);
  s.hist_mz.reserve(n_times);
  for (std::size_t k = 0; k < n_times; ++k) {
    s.mean_mx[k] = mean_of([&](const TrajectoryRecord& t) { return t.mx[k]; });
    s.mean_my[k] = mean_of([&](const TrajectoryRecord& t) { return t.my[k]; });
    s.mean_mz2[k] = mean_of([&](const TrajectoryRecord& t) { return t.mz2[k]; });
    for (std::size_t i = 0; i < m; ++i) column[i] = trajectories[i].mz[k];
    const double mean = pairwise_sum(column) / double(m);
    for (std::size_t i = 0; i < m; ++i) sq[i] = (column[i] - mean) * (column[i] - mean);
    s.mean_mz[k] = mean;
    s.var_mz[k] = m > 1 ? pairwise_sum(sq) / double(m - 1) : 0.0;
    s.se_mz[k] = jackknife_se(column);
    s.hist_mz.push_back(histogram_of(column, -1.0, 1.0, n_bins));
  }
  s.mean_norm_drift =
      mean_of([&](const TrajectoryRecord& t) { return t.norm_drift.back(); });
  return s;
}

std::optional<double> crossing_time(const std::vector<double>& times,
                                    const std::vector<double>& reference,
                                    const std::vector<double>& candidate,
                                    double threshold) {
  if (times.size() != reference.size() || times.size() != candidate.size()) {
    throw ConfigError("crossing_time series must share the grid");
  }
  if (times.empty()) return std::nullopt;
  // Crossing direction: away from the side the reference starts on.
  const double side = reference.front() <= threshold ? 1.0 : -1.0;
  auto signed_excess = [&](double v) { return side * (v - threshold); };
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double a = signed_excess(candidate[k]);
    const double b = signed_excess(candidate[k + 1]);
    if (a < 0.0 && b >= 0.0) {
      const double frac = a / (a - b);
      return times[k] + frac * (times[k + 1] - times[k]);
    }
  }
  if (signed_excess(candidate.front()) >= 0.0) return times.front();
  return std::nullopt;
}

std::vector<double> factorization_gap(const TrajectoryRecord& record) {
  if (record.mz2.size() != record.mz.size()) {
    throw ConfigError("record lacks the mz^2 series");
  }
  std::vector<double> gap(record.mz.size());
  for (std::size_t k = 0; k < gap.size(); ++k) {
    gap[k] = record.mz2[k] - record.mz[k] * record.mz[k];
  }
  return gap;
}

FactorizationComparison factorization_comparison(
    const std::vector<TrajectoryRecord>& trajectories, const DensityRecord& rho) {
  if (trajectories.empty()) throw ConfigError("empty trajectory set");
  const std::size_t n_times = rho.times.size();
  for (const auto& t : trajectories) {
    if (t.times.size() != n_times) {
      throw ConfigError("trajectory and density grids differ");
    }
  }
  FactorizationComparison out;
  out.times = rho.times;
  out.trajectory_mean_gap.resize(n_times);
  out.lindblad_gap.resize(n_times);
  std::vector<double> column(trajectories.size());
  for (std::size_t k = 0; k < n_times; ++k) {
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const auto& t = trajectories[i];
      column[i] = t.mz2[k] - t.mz[k] * t.mz[k];
    }
    out.trajectory_mean_gap[k] = pairwise_sum(column) / double(column.size());
    out.lindblad_gap[k] = rho.mz2[k] - rho.mz[k] * rho.mz[k];
  }
  return out;
}

double FokkerPlanckSolution::density(double s) const {
  const double norm = 1.0 / (2.0 * std::cosh(s0) * std::sqrt(2.0 * M_PI * tau));
  const double left = std::exp(-s0) * std::exp(-(s - s0 + tau) * (s - s0 + tau) / (2.0 * tau));
  const double right = std::exp(s0) * std::exp(-(s - s0 - tau) * (s - s0 - tau) / (2.0 * tau));
  return norm * (left + right);
}

double FokkerPlanckSolution::cdf(double s) const {
  const double sq = std::sqrt(tau);
  const double left = std::exp(-s0) * normal_cdf((s - s0 + tau) / sq);
  const double right = std::exp(s0) * normal_cdf((s - s0 - tau) / sq);
  return (left + right) / (2.0 * std::cosh(s0));
}

FokkerPlanckSolution make_fokker_planck(double mz0, double tau) {
  if (!(std::abs(mz0) < 1.0)) throw ConfigError("mz0 must be inside (-1, 1)");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  return {std::atanh(mz0), tau};
}

double fokker_planck_p_plus(double mz0) {
  if (!(std::abs(mz0) < 1.0)) throw ConfigError("mz0 must be inside (-1, 1)");
  return 0.5 * (1.0 + mz0);
}

double ks_distance_to_cdf(std::vector<double> samples,
                          const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ConfigError("no samples");
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(double(i + 1) / n - f));
    d = std::max(d, std::abs(f - double(i) / n));
  }
  return d;
}

KsTwoSampleResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    d = std::max(d, std::abs(double(i) / double(a.size()) -
                             double(j) / double(b.size())));
  }
  const double ne = double(a.size()) * double(b.size()) /
                    double(a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  return {d, kolmogorov_q(lambda)};
}

}  // namespace lmg
