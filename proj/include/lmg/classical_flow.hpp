#pragma once

#include <optional>
#include <vector>

#include "lmg/semiclassical.hpp"

namespace lmg {

enum class OrbitClass { Libration, Rotation, Separatrix };

// Classical energy level E of H(m_z, phi) = -(1 - m_z^2) cos^2(phi) - 2 h m_z
// at field h. Construction checks E against the numerically computed
// minimum over phase space.
struct EnergyLevel {
  double energy;
  double h;
};
EnergyLevel make_energy_level(double energy, double h);

// Minimum of the classical Hamiltonian over the phase space, found
// numerically (per-phi quadratic minimization over m_z on a phi grid).
double phase_space_minimum_energy(double h);

double hamiltonian_energy(PhasePoint p, double h);

// Librations below the separatrix energy -2h (only for h < 1), rotations
// otherwise; exact boundary within 1e-12 classifies as Separatrix.
OrbitClass classify_orbit(const EnergyLevel& level);

// m_z on the separatrix at angle phi: (1 + m_z) cos^2 phi = 2h, defined
// where |cos phi| > sqrt(h). Requires h in (0, 1).
std::optional<double> separatrix_mz(double phi, double h);

struct FlowRecord {
  std::vector<double> times;
  std::vector<double> mz;
  std::vector<double> phi;  // unwrapped
  std::vector<double> energy;
};

// RK4 integration of the gamma = 0 Hamilton equations
//   dm_z/dt = -d H/d phi,  dphi/dt = d H/d m_z,
// recording every dt_record. Errors out if |E(t) - E(0)| exceeds 1e-4.
FlowRecord hamiltonian_flow(PhasePoint initial, double h, double t_final, double dt,
                            double dt_record);

// Asymptotic time spent near the m_z = 1 barrier when started a distance
// delta_z from it: (-ln delta_z) / (4 sqrt(h (1 - h))).
double escape_time(double delta_z, double h);

// Numeric orbit period via Poincare return to the phi = phi(0) section
// (mod pi) with matching sign of phi_dot; quadratic interpolation of the
// crossing time. Throws for separatrix levels (infinite period).
double orbit_period(const EnergyLevel& level, double dt = 1e-4);

// Time from the start (m_z = 1 - delta_z, phi = pi/2) until phi has swept
// by pi/2, i.e. half the period of the phi-sweep; this is the measured
// counterpart of escape_time.
double measured_escape_time(double delta_z, double h, double dt = 1e-4);

}  // namespace lmg
