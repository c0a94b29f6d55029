#include "lmg/semiclassical.hpp"

#include <cmath>

#include "lmg/errors.hpp"

namespace lmg {

namespace {

struct Deriv2 {
  double dmz, dphi;
};

inline Deriv2 hamilton_rhs(double mz, double phi, double h) {
  const double c = std::cos(phi);
  return {-(1.0 - mz * mz) * std::sin(2.0 * phi), 2.0 * (mz * c * c - h)};
}

// RK4 stage for the drift of the cylindrical equations (the gamma = 0
// Hamiltonian flow; the measurement enters only through the noise).
inline void drift_rk4_cyl(double& mz, double& phi, double h, double dt) {
  const Deriv2 k1 = hamilton_rhs(mz, phi, h);
  const Deriv2 k2 = hamilton_rhs(mz + 0.5 * dt * k1.dmz, phi + 0.5 * dt * k1.dphi, h);
  const Deriv2 k3 = hamilton_rhs(mz + 0.5 * dt * k2.dmz, phi + 0.5 * dt * k2.dphi, h);
  const Deriv2 k4 = hamilton_rhs(mz + dt * k3.dmz, phi + dt * k3.dphi, h);
  mz += dt / 6.0 * (k1.dmz + 2.0 * k2.dmz + 2.0 * k3.dmz + k4.dmz);
  phi += dt / 6.0 * (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi);
}

struct Deriv3 {
  double dx, dy, dz;
};

inline Deriv3 cartesian_drift(const BlochVector& m, double h, double gamma) {
  return {2.0 * h * m.my - 0.5 * gamma * m.mx,
          -2.0 * h * m.mx + 2.0 * m.mx * m.mz - 0.5 * gamma * m.my,
          -2.0 * m.mx * m.my};
}

inline BlochVector cartesian_step_raw(const BlochVector& m, double h, double gamma,
                                      double dt, double dxi) {
  BlochVector out = m;
  const Deriv3 k1 = cartesian_drift(out, h, gamma);
  const Deriv3 k2 = cartesian_drift({m.mx + 0.5 * dt * k1.dx, m.my + 0.5 * dt * k1.dy,
                                     m.mz + 0.5 * dt * k1.dz},
                                    h, gamma);
  const Deriv3 k3 = cartesian_drift({m.mx + 0.5 * dt * k2.dx, m.my + 0.5 * dt * k2.dy,
                                     m.mz + 0.5 * dt * k2.dz},
                                    h, gamma);
  const Deriv3 k4 = cartesian_drift(
      {m.mx + dt * k3.dx, m.my + dt * k3.dy, m.mz + dt * k3.dz}, h, gamma);
  out.mx += dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  out.my += dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
  out.mz += dt / 6.0 * (k1.dz + 2.0 * k2.dz + 2.0 * k3.dz + k4.dz);
  // Ito noise: diffusion evaluated at the step start.
  const double kick = std::sqrt(gamma) * dxi;
  out.mx -= kick * m.mz * m.mx;
  out.my -= kick * m.mz * m.my;
  out.mz += kick * (1.0 - m.mz * m.mz);
  return out;
}

void validate_step_args(double t_final, double dt, double dt_record) {
  if (t_final <= 0.0) throw ConfigError("t_final must be > 0");
  if (dt <= 0.0) throw ConfigError("dt must be > 0");
  if (dt_record > 0.0 && dt > dt_record) throw ConfigError("need dt <= dt_record");
}

}  // namespace

double wrap_angle(double phi) {
  double w = std::remainder(phi, 2.0 * M_PI);
  if (w >= M_PI) w -= 2.0 * M_PI;  // remainder gives (-pi, pi]; want [-pi, pi)
  return w;
}

CartesianStepResult sde_step_cartesian(const BlochVector& m, double h, double gamma,
                                       double dt, double dxi) {
  BlochVector raw = cartesian_step_raw(m, h, gamma, dt, dxi);
  const double norm = std::sqrt(raw.norm_sq());
  if (!std::isfinite(norm) || norm == 0.0) {
    throw SolverError("Cartesian SDE step produced a non-finite state; reduce dt");
  }
  const double displacement = std::abs(norm - 1.0);
  raw.mx /= norm;
  raw.my /= norm;
  raw.mz /= norm;
  return {raw, displacement};
}

double modulus_drift_check(const BlochVector& m, double h, double gamma, double dt,
                           double dxi) {
  const BlochVector raw = cartesian_step_raw(m, h, gamma, dt, dxi);
  return raw.norm_sq() - m.norm_sq();
}

CylindricalStepResult sde_step_cylindrical(const PhasePoint& p, double h,
                                           double gamma, double dt, double dxi) {
  if (std::abs(p.mz) >= 1.0) {
    const double barrier = p.mz > 0.0 ? 1.0 : -1.0;
    return {{barrier, p.phi}, barrier > 0.0 ? Absorption::Plus : Absorption::Minus};
  }
  double mz = p.mz, phi = p.phi;
  const double noise = std::sqrt(gamma) * (1.0 - mz * mz) * dxi;
  drift_rk4_cyl(mz, phi, h, dt);
  mz += noise;
  if (!std::isfinite(mz) || !std::isfinite(phi)) {
    throw SolverError("cylindrical SDE step produced a non-finite state; reduce dt");
  }
  Absorption absorbed = Absorption::None;
  if (mz >= 1.0) {
    mz = 1.0;
    absorbed = Absorption::Plus;
  } else if (mz <= -1.0) {
    mz = -1.0;
    absorbed = Absorption::Minus;
  }
  return {{mz, wrap_angle(phi)}, absorbed};
}

namespace {

// Shared trajectory loop, integer step accounting so record grids are
// bit-identical across trajectories regardless of absorption history.
// large_gamma = true drops the Hamiltonian drift (Eq. for gamma >> h).
void integrate(SemiclassicalTrajectory& traj, double h, double gamma, double t_to,
               double dt, NoiseStream& noise, double dt_record, bool large_gamma) {
  const double sqrt_gamma = std::sqrt(gamma);
  const std::uint64_t steps_per_record =
      dt_record > 0.0 ? std::uint64_t(std::llround(dt_record / dt)) : 0;
  std::uint64_t step = std::uint64_t(std::llround(traj.t_end / dt));
  const std::uint64_t step_to = std::uint64_t(std::llround(t_to / dt));
  double mz = traj.mz_end, phi = traj.phi_end;

  auto record = [&](std::uint64_t s) {
    traj.times.push_back(double(s) * dt);
    traj.mz.push_back(mz);
    traj.phi.push_back(phi);
  };

  while (step < step_to) {
    if (traj.absorbed != Absorption::None) {
      // Barrier reached: state is frozen, fill any remaining record points.
      if (steps_per_record > 0) {
        for (std::uint64_t s = step + 1; s <= step_to; ++s) {
          if (s % steps_per_record == 0) record(s);
        }
      }
      step = step_to;
      break;
    }
    const double dxi = noise.gaussian(dt);
    const double noise_kick = sqrt_gamma * (1.0 - mz * mz) * dxi;
    if (!large_gamma) drift_rk4_cyl(mz, phi, h, dt);
    mz += noise_kick;
    if (!std::isfinite(mz) || !std::isfinite(phi)) {
      throw SolverError("cylindrical SDE step produced a non-finite state; reduce dt");
    }
    ++step;
    if (mz >= 1.0) {
      mz = 1.0;
      traj.absorbed = Absorption::Plus;
      traj.absorption_time = double(step) * dt;
    } else if (mz <= -1.0) {
      mz = -1.0;
      traj.absorbed = Absorption::Minus;
      traj.absorption_time = double(step) * dt;
    }
    if (steps_per_record > 0 && step % steps_per_record == 0) record(step);
  }
  traj.t_end = double(step_to) * dt;
  traj.mz_end = mz;
  traj.phi_end = phi;
}

}  // namespace

SemiclassicalTrajectory simulate_trajectory(PhasePoint initial, double h,
                                            double gamma, double t_final, double dt,
                                            double dt_record, NoiseStream& noise) {
  validate_step_args(t_final, dt, dt_record);
  if (std::abs(initial.mz) > 1.0) throw ConfigError("initial mz outside [-1, 1]");
  SemiclassicalTrajectory traj;
  traj.trajectory_index = noise.trajectory_index();
  traj.mz_end = initial.mz;
  traj.phi_end = wrap_angle(initial.phi);
  if (std::abs(initial.mz) == 1.0) {
    traj.absorbed = initial.mz > 0.0 ? Absorption::Plus : Absorption::Minus;
    traj.absorption_time = 0.0;
  }
  traj.times.push_back(0.0);
  traj.mz.push_back(traj.mz_end);
  traj.phi.push_back(traj.phi_end);
  integrate(traj, h, gamma, t_final, dt, noise, dt_record, false);
  return traj;
}

void extend_trajectory(SemiclassicalTrajectory& traj, double h, double gamma,
                       double new_t_final, double dt, NoiseStream& noise) {
  if (new_t_final <= traj.t_end) return;
  integrate(traj, h, gamma, new_t_final, dt, noise, 0.0, false);
}

LargeGammaStepResult large_gamma_step(double mz, double gamma, double dt,
                                      double dxi) {
  (void)dt;  // the increment dxi already carries the variance dt
  if (std::abs(mz) > 1.0) throw ConfigError("mz outside [-1, 1]");
  if (std::abs(mz) == 1.0) return {mz, true};
  double out = mz + std::sqrt(gamma) * (1.0 - mz * mz) * dxi;
  bool absorbed = false;
  if (out >= 1.0) {
    out = 1.0;
    absorbed = true;
  } else if (out <= -1.0) {
    out = -1.0;
    absorbed = true;
  }
  return {out, absorbed};
}

SemiclassicalTrajectory simulate_large_gamma(double mz0, double gamma,
                                             double t_final, double dt,
                                             double dt_record, NoiseStream& noise) {
  validate_step_args(t_final, dt, dt_record);
  if (std::abs(mz0) > 1.0) throw ConfigError("initial mz outside [-1, 1]");
  SemiclassicalTrajectory traj;
  traj.trajectory_index = noise.trajectory_index();
  traj.mz_end = mz0;
  if (std::abs(mz0) == 1.0) {
    traj.absorbed = mz0 > 0.0 ? Absorption::Plus : Absorption::Minus;
    traj.absorption_time = 0.0;
  }
  traj.times.push_back(0.0);
  traj.mz.push_back(mz0);
  traj.phi.push_back(0.0);
  integrate(traj, 0.0, gamma, t_final, dt, noise, dt_record, true);
  return traj;
}

void extend_large_gamma(SemiclassicalTrajectory& traj, double gamma,
                        double new_t_final, double dt, NoiseStream& noise) {
  if (new_t_final <= traj.t_end) return;
  integrate(traj, 0.0, gamma, new_t_final, dt, noise, 0.0, true);
}

}  // namespace lmg
