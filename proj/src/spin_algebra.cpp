#include "lmg/spin_algebra.hpp"

#include <cmath>
#include <cstdlib>

#include "lmg/errors.hpp"

namespace lmg {

CollectiveSpinOps build_collective_operators(int n_particles) {
  if (n_particles < 1) {
    throw ConfigError("particle count N must be >= 1");
  }
  const double s = 0.5 * n_particles;
  const int dim = n_particles + 1;

  CollectiveSpinOps ops;
  ops.n_particles = n_particles;
  ops.spin = s;
  ops.dim = dim;

  // Basis index i corresponds to m = S - i (descending m).
  ops.sz = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) ops.sz(i, i) = s - i;

  // Raising operator: S+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>, i.e. it maps
  // index i+1 (m-1) to index i (m).
  Matrix splus = Matrix::Zero(dim, dim);
  for (int i = 0; i + 1 < dim; ++i) {
    const double m_low = s - (i + 1);
    splus(i, i + 1) = std::sqrt(s * (s + 1.0) - m_low * (m_low + 1.0));
  }
  const Matrix sminus = splus.adjoint();
  ops.sx = 0.5 * (splus + sminus);
  ops.sy = Complex(0.0, -0.5) * (splus - sminus);

  ops.mx = ops.sx / s;
  ops.my = ops.sy / s;
  ops.mz = ops.sz / s;
  return ops;
}

PureState coherent_state(const CollectiveSpinOps& ops, CoherentAngles angles) {
  if (!(angles.theta >= 0.0 && angles.theta <= M_PI)) {
    throw ConfigError("coherent state theta outside [0, pi]");
  }
  if (!(angles.phi >= -M_PI && angles.phi < M_PI)) {
    throw ConfigError("coherent state phi outside [-pi, pi)");
  }
  const double s = ops.spin;
  const int dim = ops.dim;
  const double c = std::cos(0.5 * angles.theta);
  const double sn = std::sin(0.5 * angles.theta);

  Vector amp = Vector::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    const double m = s - i;
    const double k_down = s - m;  // exponent of sin(theta/2), = i
    const double k_up = s + m;
    // Poles: 0^0 terms handled by skipping zero-amplitude entries.
    if ((sn == 0.0 && k_down > 0.0) || (c == 0.0 && k_up > 0.0)) continue;
    // log-binomial keeps large N away from overflow
    double log_mag = 0.5 * (std::lgamma(2.0 * s + 1.0) - std::lgamma(k_down + 1.0) -
                            std::lgamma(k_up + 1.0));
    if (sn > 0.0) log_mag += k_down * std::log(sn);
    if (c > 0.0) log_mag += k_up * std::log(c);
    amp(i) = std::polar(std::exp(log_mag), k_down * angles.phi);
  }
  amp.normalize();
  return PureState{std::move(amp)};
}

double expectation(const PureState& state, const Matrix& op) {
  if (op.rows() != state.dim() || op.cols() != state.dim()) {
    throw ConfigError("operator dimension does not match state");
  }
  const Complex value = state.amplitudes.dot(op * state.amplitudes);
  if (std::abs(value.imag()) > 1e-10) {
    throw SolverError("expectation value has non-negligible imaginary part");
  }
  return value.real();
}

double expectation_density(const Matrix& rho, const Matrix& op) {
  if (rho.rows() != op.rows() || rho.cols() != op.cols()) {
    throw ConfigError("operator dimension does not match density matrix");
  }
  const Complex value = (rho * op).trace();
  if (std::abs(value.imag()) > 1e-10) {
    throw SolverError("expectation value has non-negligible imaginary part");
  }
  return value.real();
}

double connected_correlator(const CollectiveSpinOps& ops, const PureState& state,
                            Axis alpha, Axis beta) {
  const Matrix& a = ops.reduced_op(alpha);
  const Matrix& b = ops.reduced_op(beta);
  const Vector a_psi = a * state.amplitudes;
  const Vector b_psi = b * state.amplitudes;
  const Complex cross = a_psi.dot(b_psi);  // <psi| a b |psi>
  const double sym = 2.0 * cross.real();   // <ab + ba>
  const double ea = state.amplitudes.dot(a_psi).real();
  const double eb = state.amplitudes.dot(b_psi).real();
  return sym - 2.0 * ea * eb;
}

}  // namespace lmg
