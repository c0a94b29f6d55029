#include <doctest.h>

#include <cmath>
#include <vector>

#include "lmg/analysis.hpp"
#include "lmg/errors.hpp"

using namespace lmg;

namespace {

SemiclassicalTrajectory constant_trajectory(double value, std::size_t index,
                                            std::size_t n_times = 5) {
  SemiclassicalTrajectory t;
  for (std::size_t k = 0; k < n_times; ++k) {
    t.times.push_back(double(k));
    t.mz.push_back(value);
    t.phi.push_back(0.0);
  }
  t.mz_end = value;
  t.t_end = double(n_times - 1);
  t.trajectory_index = index;
  return t;
}

}  // namespace

TEST_CASE("pairwise sum and jackknife standard error") {
  std::vector<double> values{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
  CHECK(pairwise_sum(values) == doctest::Approx(28.0));
  // For the mean the jackknife reduces to s/sqrt(n).
  double mean = 28.0 / 7.0, ssq = 0.0;
  for (double v : values) ssq += (v - mean) * (v - mean);
  const double classic = std::sqrt(ssq / 6.0 / 7.0);
  CHECK(jackknife_se(values) == doctest::Approx(classic).epsilon(1e-12));
}

TEST_CASE("histogram masses sum to one and edge bins catch the barriers") {
  std::vector<double> values{-1.0, -0.999, 0.0, 0.5, 1.0, 1.0};
  const auto hist = histogram_of(values, -1.0, 1.0, 201);
  double total = 0.0;
  for (double m : hist.mass) total += m;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hist.mass.front() == doctest::Approx(2.0 / 6.0));
  CHECK(hist.mass.back() == doctest::Approx(2.0 / 6.0));
  CHECK(hist.bin_left(0) == doctest::Approx(-1.0));
  CHECK(hist.bin_right(200) == doctest::Approx(1.0));
}

TEST_CASE("summary of identical trajectories has zero variance") {
  std::vector<SemiclassicalTrajectory> set;
  for (std::size_t i = 0; i < 10; ++i) set.push_back(constant_trajectory(0.4, i));
  const auto summary = summarize_ensemble(set);
  for (double v : summary.var_mz) CHECK(v == 0.0);
  for (double m : summary.mean_mz) CHECK(m == doctest::Approx(0.4));
  CHECK(summary.n_unabsorbed == 10);
  CHECK(summary.n_plus + summary.n_minus + summary.n_unabsorbed == summary.n_traj);
}

TEST_CASE("two-level absorption rule") {
  std::vector<SemiclassicalTrajectory> set;
  auto hard = constant_trajectory(1.0, 0);
  hard.absorbed = Absorption::Plus;
  hard.absorption_time = 1.0;
  set.push_back(hard);
  set.push_back(constant_trajectory(-0.99999, 1));  // soft minus
  set.push_back(constant_trajectory(0.2, 2));       // unabsorbed
  set.push_back(constant_trajectory(0.99995, 3));   // soft plus
  const auto summary = summarize_ensemble(set, 1e-4);
  CHECK(summary.n_plus == 2);
  CHECK(summary.n_minus == 1);
  CHECK(summary.n_unabsorbed == 1);
}

TEST_CASE("p_plus estimators and the inconclusive guard") {
  std::vector<SemiclassicalTrajectory> set;
  for (std::size_t i = 0; i < 75; ++i) set.push_back(constant_trajectory(1.0, i));
  for (std::size_t i = 75; i < 100; ++i) {
    set.push_back(constant_trajectory(-1.0, i));
  }
  const auto summary = summarize_ensemble(set);
  const auto est = p_plus(summary);
  CHECK(est.value == doctest::Approx(0.75));
  CHECK(est.stderr_value ==
        doctest::Approx(std::sqrt(0.75 * 0.25 / 100.0)).epsilon(1e-12));
  CHECK(est.mean_based == doctest::Approx(0.75));
  CHECK(est.unabsorbed_fraction == 0.0);

  std::vector<SemiclassicalTrajectory> bad = set;
  for (std::size_t i = 0; i < 10; ++i) {
    bad.push_back(constant_trajectory(0.0, 100 + i));
  }
  CHECK_THROWS_AS(p_plus(summarize_ensemble(bad)), InconclusiveError);
}

TEST_CASE("gamma_critical formula and range flag") {
  CHECK(gamma_critical(0.02).value == doctest::Approx(0.28).epsilon(1e-3));
  CHECK(gamma_critical(0.5).value == doctest::Approx(1.0));
  CHECK(gamma_critical(0.0).value == 0.0);
  CHECK(gamma_critical(1.0).value == 0.0);
  CHECK(gamma_critical(0.0).in_range);
  CHECK(!gamma_critical(1.2).in_range);
  CHECK(gamma_critical(1.2).value == 0.0);
}

TEST_CASE("gamma_critical extraction finds the first significant cell") {
  const std::vector<double> grid{0.1, 0.2, 0.4, 0.8};
  const std::vector<double> plus_frac{0.0, 0.001, 0.2, 0.4};
  const auto est = extract_gamma_critical(grid, plus_frac, 10000);
  CHECK(est.found);
  CHECK(est.gamma_c == doctest::Approx(0.4));
  CHECK(est.resolution == doctest::Approx(0.2));
  const auto none = extract_gamma_critical(grid, {0.0, 0.0, 0.0, 0.0}, 10000);
  CHECK(!none.found);
}

TEST_CASE("crossing_time interpolates and honors the reference side") {
  const std::vector<double> times{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> reference{-1.0, -1.0, -1.0, -1.0};
  const std::vector<double> candidate{-1.0, -0.95, -0.85, -0.5};
  const auto t = crossing_time(times, reference, candidate, -0.9);
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(1.5));
  // Candidate identical to the reference and below threshold: no crossing.
  CHECK(!crossing_time(times, reference, reference, -0.9).has_value());
}

TEST_CASE("factorization gap uses mz2 - mz^2") {
  TrajectoryRecord rec;
  rec.times = {0.0, 1.0};
  rec.mz = {0.5, 0.2};
  rec.mz2 = {0.3, 0.1};
  const auto gap = factorization_gap(rec);
  CHECK(gap[0] == doctest::Approx(0.3 - 0.25));
  CHECK(gap[1] == doctest::Approx(0.1 - 0.04));
}

TEST_CASE("fokker-planck density normalizes and concentrates at small tau") {
  const auto sol = make_fokker_planck(0.5, 1.0);
  // Quadrature over a wide window.
  const double lo = sol.s0 - 12.0, hi = sol.s0 + 12.0;
  const int n = 20001;
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = lo + (hi - lo) * i / (n - 1);
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    integral += w * sol.density(s);
  }
  integral *= (hi - lo) / (n - 1);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));

  // CDF is consistent with the density.
  CHECK(sol.cdf(hi) - sol.cdf(lo) == doctest::Approx(1.0).epsilon(1e-9));

  // Small tau: the mass sits within |s - s0| < 0.1.
  const auto early = make_fokker_planck(0.5, 1e-4);
  CHECK(early.cdf(early.s0 + 0.1) - early.cdf(early.s0 - 0.1) ==
        doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(make_fokker_planck(0.5, 0.0), ConfigError);
  CHECK_THROWS_AS(make_fokker_planck(1.0, 1.0), ConfigError);
}

TEST_CASE("fokker-planck p_plus") {
  CHECK(fokker_planck_p_plus(0.0) == doctest::Approx(0.5));
  CHECK(fokker_planck_p_plus(0.5) == doctest::Approx(0.75));
  // p_plus - p_minus = mz0
  const double p = fokker_planck_p_plus(0.3);
  CHECK(p - (1.0 - p) == doctest::Approx(0.3));
  CHECK_THROWS_AS(fokker_planck_p_plus(1.0), ConfigError);
}

TEST_CASE("KS distance against the exact cdf of uniform samples") {
  std::vector<double> samples;
  for (int i = 0; i < 1000; ++i) samples.push_back((i + 0.5) / 1000.0);
  const double d =
      ks_distance_to_cdf(samples, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(d == doctest::Approx(0.0005).epsilon(1e-6));
}

TEST_CASE("two-sample KS accepts same-distribution samples") {
  NoiseStream a(1, 0), b(1, 1);
  std::vector<double> sa, sb;
  for (int i = 0; i < 3000; ++i) {
    sa.push_back(a.normal());
    sb.push_back(b.normal());
  }
  const auto result = ks_two_sample(sa, sb);
  CHECK(result.p_value > 0.01);
  // And rejects clearly shifted samples.
  for (double& v : sb) v += 0.5;
  const auto shifted = ks_two_sample(sa, sb);
  CHECK(shifted.p_value < 1e-6);
}

TEST_CASE("large-gamma ensemble matches the analytic distribution") {
  SemiclassicalEnsembleConfig config;
  config.gamma = 1.0;
  config.initial = {0.5, 0.0};
  config.dt = 1e-3;
  config.t_final = 1.0;
  config.dt_record = 0.5;
  config.n_trajectories = 20000;
  config.base_seed = 99;
  config.large_gamma = true;
  config.max_doublings = 0;
  const auto ensemble = run_semiclassical_ensemble(config);
  const auto& grid = ensemble.trajectories.front().times;
  REQUIRE(grid.size() >= 3);
  const std::size_t index = 2;  // tau = 1.0
  std::vector<double> s_samples;
  for (const auto& traj : ensemble.trajectories) {
    const double mz = traj.mz[index];
    if (std::abs(mz) < 1.0) s_samples.push_back(std::atanh(mz));
  }
  const auto sol = make_fokker_planck(0.5, 1.0);
  const double ks =
      ks_distance_to_cdf(s_samples, [&](double s) { return sol.cdf(s); });
  CHECK(ks < 0.02);
}

TEST_CASE("ensemble runner doubles t_final until converged") {
  SemiclassicalEnsembleConfig config;
  config.h = 0.3;
  config.gamma = 0.25;  // well below gamma_c(0.3): everything falls to -1
  config.initial = {0.0, 0.0};
  config.dt = 1e-3;
  config.t_final = 5.0;  // deliberately too short
  config.dt_record = 1.0;
  config.n_trajectories = 64;
  config.base_seed = 7;
  config.max_doublings = 5;
  const auto ensemble = run_semiclassical_ensemble(config);
  CHECK(ensemble.doublings > 0);
  const auto summary = summarize_ensemble(ensemble.trajectories);
  CHECK(double(summary.n_unabsorbed) <= 0.05 * double(summary.n_traj));
  CHECK(summary.n_minus > summary.n_plus);
  // Record grid still ends at the original horizon.
  CHECK(ensemble.trajectories.front().times.back() == doctest::Approx(5.0));
  CHECK(ensemble.t_final_used > 5.0);
}

TEST_CASE("ensemble runner is deterministic across worker counts") {
  SemiclassicalEnsembleConfig config;
  config.h = 0.3;
  config.gamma = 1.2;
  config.initial = {0.0, 0.0};
  config.dt = 1e-3;
  config.t_final = 20.0;
  config.dt_record = 5.0;
  config.n_trajectories = 200;
  config.base_seed = 4242;
  config.max_doublings = 2;
  auto a = config;
  a.workers = 1;
  auto b = config;
  b.workers = 4;
  const auto ea = run_semiclassical_ensemble(a);
  const auto eb = run_semiclassical_ensemble(b);
  REQUIRE(ea.trajectories.size() == eb.trajectories.size());
  for (std::size_t i = 0; i < ea.trajectories.size(); ++i) {
    CHECK(ea.trajectories[i].mz_end == eb.trajectories[i].mz_end);
    CHECK(int(ea.trajectories[i].absorbed) == int(eb.trajectories[i].absorbed));
  }
  const auto sa = summarize_ensemble(ea.trajectories);
  const auto sb = summarize_ensemble(eb.trajectories);
  for (std::size_t k = 0; k < sa.mean_mz.size(); ++k) {
    CHECK(sa.mean_mz[k] == sb.mean_mz[k]);  // bitwise, pairwise-summed in order
  }
}
