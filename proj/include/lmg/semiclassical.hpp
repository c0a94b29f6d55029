#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "lmg/noise.hpp"

namespace lmg {

// Thermodynamic-limit magnetization on (or near) the unit sphere.
struct BlochVector {
  double mx = 0.0, my = 0.0, mz = 0.0;
  double norm_sq() const { return mx * mx + my * my + mz * mz; }
};

// Cylindrical chart (m_z, phi); phi is canonically conjugate to m_z.
struct PhasePoint {
  double mz = 0.0;
  double phi = 0.0;
};

enum class Absorption { None, Plus, Minus };

// Wraps an angle into [-pi, pi).
double wrap_angle(double phi);

// One stochastic step of the Cartesian magnetization SDE
//   dm_x = ( 2 h m_y - g/2 m_x) dt - sqrt(g) m_z m_x dxi
//   dm_y = (-2 h m_x + 2 m_x m_z - g/2 m_y) dt - sqrt(g) m_z m_y dxi
//   dm_z = -2 m_x m_y dt + sqrt(g) (1 - m_z^2) dxi
// followed by projection back onto the unit sphere. The drift is advanced
// with one RK4 stage (the gamma = 0 flow is Hamiltonian and must conserve
// energy over long runs); the noise enters Euler-Maruyama style with the
// diffusion evaluated at the step start.
struct CartesianStepResult {
  BlochVector m;
  double projection_displacement;
};
CartesianStepResult sde_step_cartesian(const BlochVector& m, double h, double gamma,
                                       double dt, double dxi);

// Same scheme in the cylindrical chart,
//   dm_z = -2 (1 - m_z^2) sin(phi) cos(phi) dt + sqrt(g) (1 - m_z^2) dxi
//   dphi =  2 (-h + m_z cos^2(phi)) dt.
// A step that lands on or past |m_z| = 1 is clamped to the barrier and the
// trajectory is flagged absorbed; m_z = +-1 are absorbing states of the SDE.
struct CylindricalStepResult {
  PhasePoint p;  // phi wrapped to [-pi, pi)
  Absorption absorbed;
};
CylindricalStepResult sde_step_cylindrical(const PhasePoint& p, double h,
                                           double gamma, double dt, double dxi);

struct SemiclassicalTrajectory {
  std::vector<double> times;
  std::vector<double> mz;
  std::vector<double> phi;  // unwrapped; wrap on output
  Absorption absorbed = Absorption::None;
  double absorption_time = std::numeric_limits<double>::quiet_NaN();
  // State at the end of integration, which may be later than times.back()
  // when the run was extended for stationary estimates.
  double t_end = 0.0, mz_end = 0.0, phi_end = 0.0;
  std::uint64_t trajectory_index = 0;
};

// Chained cylindrical steps on a uniform record grid; stops drawing noise
// once absorbed (the remaining grid is filled with the barrier value).
// Consumes one Gaussian per step, in lockstep with sse_trajectory.
SemiclassicalTrajectory simulate_trajectory(PhasePoint initial, double h,
                                            double gamma, double t_final, double dt,
                                            double dt_record, NoiseStream& noise);

// Continues a trajectory to new_t_final without recording; used when the
// unabsorbed fraction is still too high for a stationary estimate.
void extend_trajectory(SemiclassicalTrajectory& traj, double h, double gamma,
                       double new_t_final, double dt, NoiseStream& noise);

// One-step change of |m|^2 before projection, for checking
//   d m^2 = [g dt (m_z^2 - 1) - 2 m_z sqrt(g) dxi] (m^2 - 1).
double modulus_drift_check(const BlochVector& m, double h, double gamma, double dt,
                           double dxi);

// Pure-noise reduction valid for gamma >> h: dm_z = sqrt(g)(1-m_z^2) dxi.
// Plain Euler-Maruyama, so the discrete chain is an exact martingale.
struct LargeGammaStepResult {
  double mz;
  bool absorbed;
};
LargeGammaStepResult large_gamma_step(double mz, double gamma, double dt,
                                      double dxi);

SemiclassicalTrajectory simulate_large_gamma(double mz0, double gamma,
                                             double t_final, double dt,
                                             double dt_record, NoiseStream& noise);
void extend_large_gamma(SemiclassicalTrajectory& traj, double gamma,
                        double new_t_final, double dt, NoiseStream& noise);

}  // namespace lmg
