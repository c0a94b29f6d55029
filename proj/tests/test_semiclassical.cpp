#include <doctest.h>

#include <cmath>
#include <vector>

#include "lmg/classical_flow.hpp"
#include "lmg/errors.hpp"
#include "lmg/monitored_quantum.hpp"
#include "lmg/semiclassical.hpp"

using namespace lmg;

TEST_CASE("gamma = 0 cylindrical step reproduces the Hamiltonian flow") {
  const PhasePoint p{0.2, 0.7};
  const double h = 0.3, dt = 1e-3;
  const auto stepped = sde_step_cylindrical(p, h, 0.0, dt, 0.5);
  CHECK(stepped.absorbed == Absorption::None);
  // Against the flow module's RK4 over one step.
  const auto flow = hamiltonian_flow(p, h, dt, dt, dt);
  CHECK(stepped.p.mz == doctest::Approx(flow.mz.back()).epsilon(1e-12));
  CHECK(stepped.p.phi == doctest::Approx(flow.phi.back()).epsilon(1e-12));
}

TEST_CASE("poles are fixed points of the cylindrical step") {
  for (double mz : {1.0, -1.0}) {
    const auto stepped = sde_step_cylindrical({mz, 0.3}, 0.5, 2.0, 1e-3, 1.7);
    CHECK(stepped.p.mz == mz);
    CHECK(stepped.absorbed ==
          (mz > 0 ? Absorption::Plus : Absorption::Minus));
  }
}

TEST_CASE("one-step hand evaluation at the drift-free point") {
  // At mz = 0, phi = 0 the drift of m_z vanishes, so the increment is the
  // pure noise kick sqrt(gamma) (1 - mz^2) dxi = sqrt(0.01) * 0.02.
  const double h = 0.02, gamma = 0.01, dt = 1e-3, dxi = 0.02;
  const auto stepped = sde_step_cylindrical({0.0, 0.0}, h, gamma, dt, dxi);
  const double expected_kick = std::sqrt(gamma) * dxi;  // 2e-3
  CHECK(expected_kick == doctest::Approx(2e-3).epsilon(1e-12));
  // The RK4 drift stage contributes only at O(dt^2).
  CHECK(stepped.p.mz == doctest::Approx(expected_kick).epsilon(1e-4));
  // phi moves by -2h dt at leading order.
  CHECK(stepped.p.phi == doctest::Approx(-2.0 * h * dt).epsilon(1e-3));
}

TEST_CASE("cartesian step: gamma = 0 reduces to the precession equation") {
  const BlochVector m{0.6, 0.0, 0.8};
  const double h = 0.3, dt = 1e-4;
  const auto stepped = sde_step_cartesian(m, h, 0.0, dt, 0.9);
  // dm/dt = -2 (m_x x + h z) x m
  const double bx = 2.0 * m.mx, bz = 2.0 * h;
  const double dx = -(0.0 * m.mz - bz * m.my);          // -(B x m)_x with B=(bx,0,bz)
  const double dy = -(bz * m.mx - bx * m.mz);
  const double dz = -(bx * m.my - 0.0 * m.mx);
  CHECK(stepped.m.mx == doctest::Approx(m.mx + dt * dx).epsilon(1e-7));
  CHECK(stepped.m.my == doctest::Approx(m.my + dt * dy).epsilon(1e-7));
  CHECK(stepped.m.mz == doctest::Approx(m.mz + dt * dz).epsilon(1e-7));
}

TEST_CASE("cartesian hand-evaluated step with noise") {
  const BlochVector m{1.0, 0.0, 0.0};
  const double h = 0.3, gamma = 0.1, dt = 1e-3, dxi = 0.04;
  const auto stepped = sde_step_cartesian(m, h, gamma, dt, dxi);
  // Euler-Maruyama reference values; the RK4 drift stage differs at O(dt^2).
  const double ex = 1.0 + (2.0 * h * 0.0 - 0.5 * gamma * 1.0) * dt -
                    std::sqrt(gamma) * 0.0 * 1.0 * dxi;
  const double ey = (-2.0 * h * 1.0 + 2.0 * 1.0 * 0.0) * dt;
  const double ez = std::sqrt(gamma) * (1.0 - 0.0) * dxi;
  const double norm = std::sqrt(ex * ex + ey * ey + ez * ez);
  CHECK(stepped.m.mx == doctest::Approx(ex / norm).epsilon(1e-5));
  CHECK(stepped.m.my == doctest::Approx(ey / norm).epsilon(1e-4));
  CHECK(stepped.m.mz == doctest::Approx(ez / norm).epsilon(1e-4));
  CHECK(stepped.m.norm_sq() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("modulus drift matches the closed-form expression") {
  const double h = 0.3, gamma = 0.2, dt = 1e-3;
  auto formula = [&](const BlochVector& m, double dxi_sq_as_dt, double dxi) {
    return (gamma * dxi_sq_as_dt * (m.mz * m.mz - 1.0) -
            2.0 * m.mz * std::sqrt(gamma) * dxi) *
           (m.norm_sq() - 1.0);
  };

  // Unit sphere is invariant: the formula vanishes identically there, and
  // the one-step change reduces to the O(dt) quadratic-variation residual
  // gamma dt (1 - mz^2)(n^2 - 1), which vanishes for |dxi| = sqrt(dt).
  const BlochVector unit{0.6, 0.48, 0.64};
  CHECK(std::abs(unit.norm_sq() - 1.0) < 1e-12);
  for (double n : {-1.0, 1.0}) {
    CHECK(std::abs(modulus_drift_check(unit, h, gamma, dt, n * std::sqrt(dt))) <
          0.02 * dt);
  }
  for (double n : {0.0, 2.0}) {
    const double expected = gamma * dt * (1.0 - unit.mz * unit.mz) * (n * n - 1.0);
    CHECK(modulus_drift_check(unit, h, gamma, dt, n * std::sqrt(dt)) ==
          doctest::Approx(expected).epsilon(0.05));
  }

  // |m|^2 = 0.9 at mz = 0: drift = gamma dt (0 - 1)(0.9 - 1) = +0.1 gamma dt
  // once dxi^2 is evaluated at its mean dt (use dxi = sqrt(dt)).
  {
    const BlochVector m{std::sqrt(0.9), 0.0, 0.0};
    const double dxi = std::sqrt(dt);
    const double got = modulus_drift_check(m, h, gamma, dt, dxi);
    const double expected = formula(m, dt, dxi);
    CHECK(expected == doctest::Approx(0.1 * gamma * dt).epsilon(1e-9));
    CHECK(got == doctest::Approx(expected).epsilon(0.02));
  }

  // |m|^2 = 1.1 at mz = 0.5 with dxi = 0: gamma dt (0.25 - 1) (0.1)
  {
    BlochVector m{0.0, 0.0, 0.5};
    const double target_perp = 1.1 - 0.25;
    m.mx = std::sqrt(target_perp);
    const double got = modulus_drift_check(m, h, gamma, dt, 0.0);
    const double expected = gamma * dt * (0.25 - 1.0) * 0.1;
    CHECK(got == doctest::Approx(expected).epsilon(0.02));
  }

  // O(dt) residual scaling: with dxi = sqrt(dt) the residual against the
  // formula shrinks by ~2 when dt halves.
  {
    const BlochVector m{0.8, 0.3, std::sqrt(1.0 - 0.64 - 0.09) + 0.05};
    double resid_coarse = 0.0, resid_fine = 0.0;
    const double dt1 = 1e-3, dt2 = 5e-4;
    resid_coarse = std::abs(modulus_drift_check(m, h, gamma, dt1, std::sqrt(dt1)) -
                            formula(m, dt1, std::sqrt(dt1)));
    resid_fine = std::abs(modulus_drift_check(m, h, gamma, dt2, std::sqrt(dt2)) -
                          formula(m, dt2, std::sqrt(dt2)));
    CHECK(resid_fine < 0.75 * resid_coarse);
  }
}

TEST_CASE("cylindrical and cartesian integrators agree at O(dt)") {
  // Halving dt on the SAME Brownian path: fine increments are drawn first,
  // the coarse path consumes their pairwise sums.
  const double h = 0.3, gamma = 0.15, t_final = 20.0;
  const PhasePoint start{0.3, 0.4};
  const double dt_fine = 1e-3;
  const auto n_fine = std::size_t(std::llround(t_final / dt_fine));
  NoiseStream noise(555, 0);
  std::vector<double> fine(n_fine);
  for (auto& dxi : fine) dxi = noise.gaussian(dt_fine);

  auto run_pair_distance = [&](double dt, const std::vector<double>& increments) {
    PhasePoint p = start;
    BlochVector m{std::sqrt(1.0 - start.mz * start.mz) * std::cos(start.phi),
                  std::sqrt(1.0 - start.mz * start.mz) * std::sin(start.phi),
                  start.mz};
    double max_gap = 0.0;
    for (double dxi : increments) {
      const auto c = sde_step_cylindrical(p, h, gamma, dt, dxi);
      p = c.p;
      m = sde_step_cartesian(m, h, gamma, dt, dxi).m;
      if (std::abs(p.mz) > 0.98) break;  // stay clear of chart singularities
      max_gap = std::max(max_gap, std::abs(p.mz - m.mz));
    }
    return max_gap;
  };

  std::vector<double> coarse(n_fine / 2);
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    coarse[i] = fine[2 * i] + fine[2 * i + 1];
  }
  const double gap_fine = run_pair_distance(dt_fine, fine);
  const double gap_coarse = run_pair_distance(2.0 * dt_fine, coarse);
  CHECK(gap_fine < gap_coarse);
  const double ratio = gap_coarse / gap_fine;
  CHECK(ratio > std::pow(2.0, 0.7));  // slope 1 +- 0.3 in dt
  CHECK(ratio < std::pow(2.0, 2.0));
}

TEST_CASE("absorption is permanent and recorded") {
  NoiseStream noise(31, 4);
  // Strong noise from near the barrier: certain absorption well before t_final.
  const auto traj = simulate_trajectory({0.999, 0.0}, 0.02, 60.0, 50.0, 1e-3,
                                        0.5, noise);
  REQUIRE(traj.absorbed != Absorption::None);
  CHECK(std::isfinite(traj.absorption_time));
  const double barrier = traj.absorbed == Absorption::Plus ? 1.0 : -1.0;
  bool after = false;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (traj.times[k] >= traj.absorption_time) {
      after = true;
      CHECK(traj.mz[k] == barrier);
    }
  }
  CHECK(after);
  CHECK(traj.mz_end == barrier);
}

TEST_CASE("gamma = 0 trajectory conserves energy and never absorbs") {
  NoiseStream noise(8, 0);
  const double h = 0.3;
  const PhasePoint start{0.2, 0.5};
  const double e0 = hamiltonian_energy(start, h);
  const auto traj = simulate_trajectory(start, h, 0.0, 100.0, 1e-4, 1.0, noise);
  CHECK(traj.absorbed == Absorption::None);
  const double e1 = hamiltonian_energy({traj.mz_end, traj.phi_end}, h);
  CHECK(std::abs(e1 - e0) < 1e-4);
}

TEST_CASE("large-gamma step martingale and fixed points") {
  CHECK(large_gamma_step(1.0, 3.0, 1e-3, 0.4).mz == 1.0);
  CHECK(large_gamma_step(-1.0, 3.0, 1e-3, 0.4).mz == -1.0);
  // The increment is odd in dxi, so the chain preserves the mean exactly
  // (away from the clamp).
  const double mz = 0.37, gamma = 1.0, dt = 1e-3;
  for (double dxi : {0.01, 0.2, 0.5}) {
    const double up = large_gamma_step(mz, gamma, dt, dxi).mz;
    const double down = large_gamma_step(mz, gamma, dt, -dxi).mz;
    CHECK(up + down == doctest::Approx(2.0 * mz).epsilon(1e-14));
  }
  // tanh substitution: s-increments are Gaussian with drift tanh(s) gamma dt.
  // One Euler step of ds = tanh(s) dtau + dxi mapped back through tanh
  // agrees with the m_z chain at O(dtau).
  const double s = std::atanh(mz);
  const double dtau = gamma * dt;
  const double dxi_tau = 0.3 * std::sqrt(dtau);
  const double s_next = s + std::tanh(s) * dtau + dxi_tau;
  const double mz_next =
      large_gamma_step(mz, gamma, dt, dxi_tau / std::sqrt(gamma)).mz;
  CHECK(std::atanh(mz_next) == doctest::Approx(s_next).epsilon(0.05));
}

TEST_CASE("large-gamma ensemble mean of mz is time independent") {
  const double gamma = 1.0, dt = 1e-3, t_final = 2.0;
  const std::size_t m = 4000;
  const double mz0 = 0.3;
  std::vector<double> finals(m);
  double mean = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    NoiseStream noise(2024, i);
    const auto traj = simulate_large_gamma(mz0, gamma, t_final, dt, 0.5, noise);
    finals[i] = traj.mz_end;
    mean += traj.mz_end;
  }
  mean /= double(m);
  double var = 0.0;
  for (double f : finals) var += (f - mean) * (f - mean);
  var /= double(m - 1);
  const double se = std::sqrt(var / double(m));
  CHECK(std::abs(mean - mz0) < 3.0 * se);
}

TEST_CASE("matched noise: SSE trajectories converge to the semiclassical one") {
  // Weak-monitoring window (gamma S t << 1, libration regime): beyond it
  // the conditional state squeezes in S_z and its noise response drops
  // below the coherent-state coefficient, so pathwise tracking degrades
  // again. Monotone-trend test over S = 32..256, averaged over noise
  // realizations.
  const double h = 0.2, gamma = 4e-4, dt = 5e-4, t_probe = 2.0;
  const int reps = 8;
  std::vector<double> distances;
  for (int n : {64, 128, 256, 512}) {
    const auto model = make_model(h, gamma, n);
    const auto psi = coherent_state(model.ops, {M_PI / 2, 0.0});
    double acc = 0.0;
    for (int r = 0; r < reps; ++r) {
      NoiseStream noise_q(4242, std::uint64_t(r));
      NoiseStream noise_c(4242, std::uint64_t(r));
      const auto quantum =
          sse_trajectory(model, psi, t_probe, dt, 0.25, noise_q);
      const auto classical =
          simulate_trajectory({0.0, 0.0}, h, gamma, t_probe, dt, 0.25, noise_c);
      double max_gap = 0.0;
      for (std::size_t k = 0; k < quantum.times.size(); ++k) {
        max_gap = std::max(max_gap, std::abs(quantum.mz[k] - classical.mz[k]));
      }
      acc += max_gap;
    }
    distances.push_back(acc / reps);
  }
  CHECK(distances.back() < 0.5 * distances.front());
  for (std::size_t i = 1; i < distances.size(); ++i) {
    CHECK(distances[i] < 1.3 * distances[i - 1]);
  }
}

TEST_CASE("trajectory record grids are identical across histories") {
  NoiseStream a(5, 0), b(5, 1);
  const auto t1 = simulate_trajectory({0.0, 0.0}, 0.3, 0.5, 20.0, 1e-3, 0.5, a);
  const auto t2 = simulate_trajectory({0.9, 0.0}, 0.3, 5.0, 20.0, 1e-3, 0.5, b);
  REQUIRE(t1.times.size() == t2.times.size());
  for (std::size_t k = 0; k < t1.times.size(); ++k) {
    CHECK(t1.times[k] == t2.times[k]);
  }
}
