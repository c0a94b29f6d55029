#include "lmg/classical_flow.hpp"

#include <cmath>

#include "lmg/errors.hpp"

namespace lmg {

namespace {

struct State {
  double mz, phi;
};

inline State rhs(const State& y, double h) {
  const double c = std::cos(y.phi);
  return {-(1.0 - y.mz * y.mz) * std::sin(2.0 * y.phi), 2.0 * (y.mz * c * c - h)};
}

inline State rk4(const State& y, double h, double dt) {
  const State k1 = rhs(y, h);
  const State k2 = rhs({y.mz + 0.5 * dt * k1.mz, y.phi + 0.5 * dt * k1.phi}, h);
  const State k3 = rhs({y.mz + 0.5 * dt * k2.mz, y.phi + 0.5 * dt * k2.phi}, h);
  const State k4 = rhs({y.mz + dt * k3.mz, y.phi + dt * k3.phi}, h);
  return {y.mz + dt / 6.0 * (k1.mz + 2.0 * k2.mz + 2.0 * k3.mz + k4.mz),
          y.phi + dt / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi)};
}

// Root of the quadratic through (t0,f0),(t1,f1),(t2,f2) inside [t1, t2];
// falls back to linear interpolation between the bracketing points.
double quadratic_crossing(double t0, double f0, double t1, double f1, double t2,
                          double f2) {
  const double linear = t1 + (t2 - t1) * f1 / (f1 - f2);
  const double d0 = (t0 - t1) * (t0 - t2);
  const double d1 = (t1 - t0) * (t1 - t2);
  const double d2 = (t2 - t0) * (t2 - t1);
  // Lagrange coefficients of f(t) = a t^2 + b t + c
  const double a = f0 / d0 + f1 / d1 + f2 / d2;
  const double b = -(f0 * (t1 + t2) / d0 + f1 * (t0 + t2) / d1 + f2 * (t0 + t1) / d2);
  const double c = f0 * t1 * t2 / d0 + f1 * t0 * t2 / d1 + f2 * t0 * t1 / d2;
  if (a == 0.0) return linear;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return linear;
  const double sq = std::sqrt(disc);
  for (const double root : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (root >= t1 && root <= t2) return root;
  }
  return linear;
}

}  // namespace

double hamiltonian_energy(PhasePoint p, double h) {
  const double c = std::cos(p.phi);
  return -(1.0 - p.mz * p.mz) * c * c - 2.0 * h * p.mz;
}

double phase_space_minimum_energy(double h) {
  // For fixed phi the energy is quadratic in m_z; minimize it exactly and
  // scan phi. 4097 points resolve the landscape far below the check's needs.
  const int n = 4097;
  double emin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double phi = -M_PI + 2.0 * M_PI * i / (n - 1);
    const double c2 = std::cos(phi) * std::cos(phi);
    for (double mz : {-1.0, 1.0, c2 > 0.0 ? std::clamp(h / c2, -1.0, 1.0) : 0.0}) {
      emin = std::min(emin, hamiltonian_energy({mz, phi}, h));
    }
  }
  return emin;
}

EnergyLevel make_energy_level(double energy, double h) {
  const double emin = phase_space_minimum_energy(h);
  if (energy < emin - 1e-9) {
    throw ConfigError("energy below the phase-space minimum");
  }
  return {energy, h};
}

OrbitClass classify_orbit(const EnergyLevel& level) {
  if (level.h >= 1.0) return OrbitClass::Rotation;
  const double separatrix_energy = -2.0 * level.h;
  if (std::abs(level.energy - separatrix_energy) <= 1e-12) {
    return OrbitClass::Separatrix;
  }
  return level.energy < separatrix_energy ? OrbitClass::Libration
                                          : OrbitClass::Rotation;
}

std::optional<double> separatrix_mz(double phi, double h) {
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("separatrix requires h in (0, 1)");
  const double c2 = std::cos(phi) * std::cos(phi);
  if (c2 <= h) return std::nullopt;
  return 2.0 * h / c2 - 1.0;
}

FlowRecord hamiltonian_flow(PhasePoint initial, double h, double t_final, double dt,
                            double dt_record) {
  if (t_final <= 0.0 || dt <= 0.0 || dt > dt_record) {
    throw ConfigError("need 0 < dt <= dt_record <= t_final");
  }
  const double e0 = hamiltonian_energy(initial, h);
  const auto steps_per_record = std::uint64_t(std::llround(dt_record / dt));
  const auto steps_total = std::uint64_t(std::llround(t_final / dt));

  FlowRecord rec;
  State y{initial.mz, initial.phi};
  rec.times.push_back(0.0);
  rec.mz.push_back(y.mz);
  rec.phi.push_back(y.phi);
  rec.energy.push_back(e0);

  for (std::uint64_t step = 1; step <= steps_total; ++step) {
    y = rk4(y, h, dt);
    if (step % steps_per_record == 0 || step == steps_total) {
      const double e = hamiltonian_energy({y.mz, y.phi}, h);
      if (!std::isfinite(e) || std::abs(e - e0) > 1e-4) {
        throw SolverError("Hamiltonian flow energy drift exceeded 1e-4; reduce dt");
      }
      rec.times.push_back(double(step) * dt);
      rec.mz.push_back(y.mz);
      rec.phi.push_back(y.phi);
      rec.energy.push_back(e);
    }
  }
  return rec;
}

double escape_time(double delta_z, double h) {
  if (!(delta_z > 0.0 && delta_z < 0.5)) {
    throw ConfigError("escape_time requires 0 < delta_z << 1");
  }
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("escape_time requires h in (0, 1)");
  return -std::log(delta_z) / (4.0 * std::sqrt(h * (1.0 - h)));
}

double measured_escape_time(double delta_z, double h, double dt) {
  if (!(delta_z > 0.0 && delta_z < 0.5)) {
    throw ConfigError("measured_escape_time requires 0 < delta_z << 1");
  }
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("h must be in (0, 1)");
  State y{1.0 - delta_z, 0.5 * M_PI};
  double t = 0.0;
  double prev_phi = y.phi;
  const double t_cap = 100.0 * escape_time(delta_z, h) + 10.0;
  while (t < t_cap) {
    const State next = rk4(y, h, dt);
    if (next.phi <= 0.0) {
      return quadratic_crossing(t - dt, prev_phi, t, y.phi, t + dt, next.phi);
    }
    prev_phi = y.phi;
    y = next;
    t += dt;
  }
  throw SolverError("phi never swept past 0; flow did not leave the barrier");
}

double orbit_period(const EnergyLevel& level, double dt) {
  const OrbitClass kind = classify_orbit(level);
  if (kind == OrbitClass::Separatrix) {
    throw ConfigError("orbit period diverges on the separatrix");
  }
  const double h = level.h;
  const double e = level.energy;
  // Level-set point at phi = 0: m_z^2 - 2 h m_z - 1 = E has the in-range
  // root m_z = h - sqrt(h^2 + 1 + E).
  const double disc = h * h + 1.0 + e;
  if (disc <= 1e-12) {
    throw ConfigError("energy too close to the fixed point for period detection");
  }
  const double mz0 = h - std::sqrt(disc);
  if (std::abs(mz0) >= 1.0 - 1e-12) {
    throw ConfigError("level-set point is on the absorbing pole");
  }
  State y{mz0, 0.0};
  const double dphi0 = rhs(y, h).phi;
  if (std::abs(dphi0) < 1e-12) {
    throw ConfigError("starting point lies on a fixed point of the flow");
  }
  const double sign0 = dphi0 > 0.0 ? 1.0 : -1.0;

  // Section function s = sin(phi - phi0) on the mod-pi cylinder changes
  // sign at each crossing; demand matching phi_dot direction. sin(2x)
  // would vanish at both phi0 and phi0 + pi/2, so track the residual of
  // phi mod pi directly.
  auto section = [&](const State& st) {
    return std::remainder(st.phi - 0.0, M_PI);
  };

  double t = 0.0;
  double prev_s = 0.0;
  bool armed = false;  // wait until we have left the section neighborhood
  const double t_cap = 1e7 * dt;
  State prev = y;
  while (t < t_cap) {
    const State next = rk4(y, h, dt);
    const double s = section(next);
    if (armed) {
      const bool crossed = (prev_s < 0.0 && s >= 0.0) || (prev_s > 0.0 && s <= 0.0);
      if (crossed && std::abs(s - prev_s) < 0.5 * M_PI) {
        const double dphi = rhs(next, h).phi;
        if (dphi * sign0 > 0.0) {
          const double s_before = section(y);
          return quadratic_crossing(t - dt, section(prev), t, s_before, t + dt, s);
        }
      }
    } else if (std::abs(s) > 16.0 * dt * std::abs(dphi0)) {
      armed = true;
    }
    prev = y;
    prev_s = s;
    y = next;
    t += dt;
  }
  throw SolverError("no Poincare return detected; refine dt or energy");
}

}  // namespace lmg
