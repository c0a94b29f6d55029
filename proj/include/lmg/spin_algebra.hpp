#pragma once

#include <Eigen/Dense>
#include <complex>

namespace lmg {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

enum class Axis { X, Y, Z };

// Collective spin operators for N spin-1/2 particles restricted to the
// maximal sector S = N/2, in the Dicke basis ordered by descending S_z
// eigenvalue m = S, S-1, ..., -S. Built once, immutable afterwards;
// solvers share them read-only.
struct CollectiveSpinOps {
  int n_particles;  // N
  double spin;      // S = N/2
  int dim;          // 2S+1
  Matrix sx, sy, sz;
  Matrix mx, my, mz;  // reduced operators S_alpha / S

  const Matrix& spin_op(Axis a) const {
    switch (a) {
      case Axis::X: return sx;
      case Axis::Y: return sy;
      default: return sz;
    }
  }
  const Matrix& reduced_op(Axis a) const {
    switch (a) {
      case Axis::X: return mx;
      case Axis::Y: return my;
      default: return mz;
    }
  }
};

CollectiveSpinOps build_collective_operators(int n_particles);

// Normalized pure state in the Dicke basis (m descending).
struct PureState {
  Vector amplitudes;
  int dim() const { return int(amplitudes.size()); }
};

// Direction angles of a coherent spin state; theta in [0, pi],
// phi in [-pi, pi).
struct CoherentAngles {
  double theta;
  double phi;
};

// Maximal eigenstate of n(theta, phi) . S, expanded over |m>.
PureState coherent_state(const CollectiveSpinOps& ops, CoherentAngles angles);

// <psi|O|psi> for Hermitian O. Throws on dimension mismatch; asserts the
// imaginary residue is below 1e-10 before discarding it.
double expectation(const PureState& state, const Matrix& op);
// tr(rho O), density-matrix variant.
double expectation_density(const Matrix& rho, const Matrix& op);

// <m_a m_b + m_b m_a> - 2 <m_a><m_b> on the reduced operators.
double connected_correlator(const CollectiveSpinOps& ops, const PureState& state,
                            Axis alpha, Axis beta);

}  // namespace lmg
