#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lmg/noise.hpp"
#include "lmg/spin_algebra.hpp"

namespace lmg {

// Monitored LMG model at finite N: Hamiltonian H = -Sx^2/S - 2 h Sz with
// continuous monitoring of X = Sz at strength gamma. H is pentadiagonal
// in the Dicke basis, which the integrators exploit.
struct ModelSpec {
  double h = 0.0;
  double gamma = 0.0;
  int n_particles = 0;
  CollectiveSpinOps ops;
  Matrix hamiltonian;
  Eigen::VectorXd x_diag;        // diagonal of X = Sz
  Eigen::VectorXd raising_offd;  // <m+1|S+|m>, used for fast <Sx>, <Sy>
  Matrix mx_sq, my_sq;           // reduced second-moment operators
  int bandwidth = 2;
};

ModelSpec make_model(double h, double gamma, int n_particles);

// Banded product out = H in (bandwidth from the model).
void apply_hamiltonian(const ModelSpec& model, const Vector& in, Vector& out);

// One trajectory of expectation values on a uniform record grid.
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> mx, my, mz, mz2;
  // Running mean of the signed pre-renormalization norm^2 deviation per step.
  std::vector<double> norm_drift;
  // Integrated measurement signal Y_t (discrete monitoring only).
  std::vector<double> counting;
  std::uint64_t trajectory_index = 0;
  std::optional<PureState> final_state;
};

// Density-matrix evolution summary on a time grid.
struct DensityRecord {
  std::vector<double> times;
  std::vector<double> mx, my, mz;
  std::vector<double> mx2, my2, mz2;
  std::vector<double> purity;
  std::vector<double> trace_err;
  double max_trace_drift = 0.0;
  std::vector<Matrix> states;  // filled when store_states was requested
};

struct SseStepResult {
  PureState state;
  double norm_drift;  // pre-renormalization norm^2 - 1
};

// One Euler-Maruyama step of the stochastic Schroedinger equation
//   d|psi> = -iH|psi> dt - (gamma/2)(X-<X>)^2|psi> dt + sqrt(gamma)(X-<X>)|psi> dxi
// followed by renormalization.
SseStepResult sse_step(const PureState& state, const ModelSpec& model, double dt,
                       double dxi);

// Chains sse_step over [0, t_final], sampling observables every dt_record.
// Consumes exactly one Gaussian increment per step so a semiclassical
// integrator fed the same NoiseStream sees identical noise.
TrajectoryRecord sse_trajectory(const ModelSpec& model, const PureState& initial,
                                double t_final, double dt, double dt_record,
                                NoiseStream& noise, bool keep_final_state = false);

// Fixed-step RK4 for d rho/dt = -i[H,rho] - (gamma/2)[X,[X,rho]] with the
// trace renormalized each step (drift logged, error beyond 1e-6/step).
DensityRecord lindblad_evolve(const ModelSpec& model, const Matrix& rho0,
                              const std::vector<double>& t_grid, double dt,
                              bool store_states = false);

// Largest stable RK4 step for this model (dissipator-dominated bound).
double lindblad_stable_dt(const ModelSpec& model);

// d<O>/dt series under the adjoint Lindbladian, i<[H,O]> - (gamma/2)<[X,[X,O]]>,
// evaluated on the stored states of rho_t.
std::vector<double> adjoint_lindblad_observable(const ModelSpec& model,
                                                const Matrix& observable,
                                                const DensityRecord& rho_t);

// Weak-measurement Kraus operators of the two-outcome ancilla model,
//   L_pm = (1 - i dt H -+ sqrt(gamma dt) X - gamma dt X^2 / 2) / sqrt(2),
// with gamma = lambda^2 dt.
struct KrausPair {
  Matrix l_plus, l_minus;
  double gamma;
};
KrausPair kraus_pair(const ModelSpec& model, double lambda, double delta_t);

// Repeated weak ancilla measurements: sample outcome a with
// P(a) = |L_a psi|^2, apply L_a, renormalize; Y_t = sqrt(dt) * sum(a).
TrajectoryRecord discrete_monitoring_run(const ModelSpec& model,
                                         const PureState& initial, double delta_t,
                                         int n_steps, std::uint64_t base_seed,
                                         std::uint64_t trajectory_index,
                                         int record_every = 1);

// Density matrix of the coherent state at the given angles.
Matrix coherent_density(const CollectiveSpinOps& ops, CoherentAngles angles);

}  // namespace lmg
