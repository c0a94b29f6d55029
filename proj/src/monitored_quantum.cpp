#include "lmg/monitored_quantum.hpp"

#include <cmath>
#include <complex>

#include "lmg/errors.hpp"

namespace lmg {

namespace {

constexpr Complex kImag{0.0, 1.0};

// Observables that are cheap in the Dicke basis: <S+> gives <Sx> + i <Sy>.
struct SpinMoments {
  double mx, my, mz, mz2;
};

SpinMoments moments_of(const ModelSpec& model, const Vector& psi) {
  const double s = model.ops.spin;
  const int d = model.ops.dim;
  Complex splus{0.0, 0.0};
  double mz = 0.0, mz2 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double p = std::norm(psi(i));
    const double m = model.x_diag(i);
    mz += m * p;
    mz2 += m * m * p;
    if (i + 1 < d) {
      splus += std::conj(psi(i)) * model.raising_offd(i) * psi(i + 1);
    }
  }
  return {splus.real() / s, splus.imag() / s, mz / s, mz2 / (s * s)};
}

// In-place Euler-Maruyama step; returns the pre-renormalization norm^2 - 1.
// The unitary factor carries its second-order Taylor term: a bare Euler
// factor loses energy at O(dt^2) per step, which accumulates far beyond
// the conservation tolerances at gamma = 0, while the extra term leaves
// the measurement terms (and the strong order 1/2 of the scheme) alone.
// hpsi/h2psi are scratch to avoid per-step allocation.
double sse_step_core(Vector& psi, const ModelSpec& model, double dt, double dxi,
                     Vector& hpsi, Vector& h2psi) {
  const int d = int(psi.size());
  apply_hamiltonian(model, psi, hpsi);
  apply_hamiltonian(model, hpsi, h2psi);

  double x_mean = 0.0;
  for (int i = 0; i < d; ++i) x_mean += model.x_diag(i) * std::norm(psi(i));

  const double sqrt_gamma_dxi = std::sqrt(model.gamma) * dxi;
  const double half_gamma_dt = 0.5 * model.gamma * dt;
  const double half_dt_sq = 0.5 * dt * dt;
  double norm_sq = 0.0;
  for (int i = 0; i < d; ++i) {
    const double xc = model.x_diag(i) - x_mean;
    const Complex next = psi(i) - kImag * dt * hpsi(i) - half_dt_sq * h2psi(i) +
                         (sqrt_gamma_dxi * xc - half_gamma_dt * xc * xc) * psi(i);
    psi(i) = next;
    norm_sq += std::norm(next);
  }
  if (!std::isfinite(norm_sq) || norm_sq < 1e-4 || norm_sq > 1e4) {
    throw SolverError("SSE step lost normalization; reduce dt");
  }
  psi *= 1.0 / std::sqrt(norm_sq);
  return norm_sq - 1.0;
}

void check_record_bounds(const SpinMoments& m) {
  const double bound = 1.0 + 1e-6;
  if (std::abs(m.mx) > bound || std::abs(m.my) > bound || std::abs(m.mz) > bound) {
    throw SolverError("trajectory observable left the unit ball; reduce dt");
  }
}

// Lindblad right-hand side with banded commutator products.
void lindblad_rhs(const ModelSpec& model, const Matrix& rho, Matrix& out) {
  const int d = model.ops.dim;
  const int bw = model.bandwidth;
  const Matrix& ham = model.hamiltonian;
  out.setZero();
  // out = -i (H rho - rho H), column by column to stay in contiguous memory.
  for (int j = 0; j < d; ++j) {
    auto out_col = out.col(j);
    for (int i = 0; i < d; ++i) {
      const int k0 = std::max(0, i - bw), k1 = std::min(d - 1, i + bw);
      Complex acc{0.0, 0.0};
      for (int k = k0; k <= k1; ++k) acc += ham(i, k) * rho(k, j);
      out_col(i) = acc;
    }
  }
  for (int j = 0; j < d; ++j) {
    const int k0 = std::max(0, j - bw), k1 = std::min(d - 1, j + bw);
    for (int k = k0; k <= k1; ++k) {
      out.col(j).noalias() -= rho.col(k) * ham(k, j);
    }
  }
  out *= -kImag;
  // Dissipator: X diagonal makes the double commutator elementwise.
  const double half_gamma = 0.5 * model.gamma;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      const double diff = model.x_diag(i) - model.x_diag(j);
      out(i, j) -= half_gamma * diff * diff * rho(i, j);
    }
  }
}

}  // namespace

ModelSpec make_model(double h, double gamma, int n_particles) {
  if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
  ModelSpec model;
  model.h = h;
  model.gamma = gamma;
  model.n_particles = n_particles;
  model.ops = build_collective_operators(n_particles);
  const double s = model.ops.spin;
  model.hamiltonian =
      -(model.ops.sx * model.ops.sx) / s - 2.0 * h * model.ops.sz;
  model.x_diag = model.ops.sz.diagonal().real();
  const int d = model.ops.dim;
  model.raising_offd = Eigen::VectorXd::Zero(std::max(1, d - 1));
  for (int i = 0; i + 1 < d; ++i) {
    // <m|S+|m-1> with m = S - i
    const double m_low = s - (i + 1);
    model.raising_offd(i) = std::sqrt(s * (s + 1.0) - m_low * (m_low + 1.0));
  }
  model.mx_sq = model.ops.mx * model.ops.mx;
  model.my_sq = model.ops.my * model.ops.my;
  return model;
}

void apply_hamiltonian(const ModelSpec& model, const Vector& in, Vector& out) {
  const int d = int(in.size());
  const int bw = model.bandwidth;
  out.resize(d);
  for (int i = 0; i < d; ++i) {
    const int k0 = std::max(0, i - bw), k1 = std::min(d - 1, i + bw);
    Complex acc{0.0, 0.0};
    for (int k = k0; k <= k1; ++k) acc += model.hamiltonian(i, k) * in(k);
    out(i) = acc;
  }
}

SseStepResult sse_step(const PureState& state, const ModelSpec& model, double dt,
                       double dxi) {
  if (dt <= 0.0) throw ConfigError("dt must be > 0");
  if (state.dim() != model.ops.dim) throw ConfigError("state dimension mismatch");
  Vector psi = state.amplitudes;
  Vector hpsi(psi.size()), h2psi(psi.size());
  const double drift = sse_step_core(psi, model, dt, dxi, hpsi, h2psi);
  return {PureState{std::move(psi)}, drift};
}

TrajectoryRecord sse_trajectory(const ModelSpec& model, const PureState& initial,
                                double t_final, double dt, double dt_record,
                                NoiseStream& noise, bool keep_final_state) {
  if (t_final <= 0.0) throw ConfigError("t_final must be > 0");
  if (dt <= 0.0 || dt > dt_record) throw ConfigError("need 0 < dt <= dt_record");
  if (initial.dim() != model.ops.dim) throw ConfigError("state dimension mismatch");

  const int steps_per_record = int(std::llround(dt_record / dt));
  const int n_records = int(std::llround(t_final / (steps_per_record * dt)));

  TrajectoryRecord rec;
  rec.trajectory_index = noise.trajectory_index();
  const auto reserve = std::size_t(n_records) + 1;
  rec.times.reserve(reserve);
  rec.mx.reserve(reserve);
  rec.my.reserve(reserve);
  rec.mz.reserve(reserve);
  rec.mz2.reserve(reserve);
  rec.norm_drift.reserve(reserve);

  Vector psi = initial.amplitudes;
  Vector hpsi(psi.size()), h2psi(psi.size());
  double drift_sum = 0.0;
  std::uint64_t n_steps = 0;

  auto record_at = [&](double t) {
    const SpinMoments m = moments_of(model, psi);
    check_record_bounds(m);
    rec.times.push_back(t);
    rec.mx.push_back(m.mx);
    rec.my.push_back(m.my);
    rec.mz.push_back(m.mz);
    rec.mz2.push_back(m.mz2);
    rec.norm_drift.push_back(n_steps > 0 ? drift_sum / double(n_steps) : 0.0);
  };

  record_at(0.0);
  for (int r = 1; r <= n_records; ++r) {
    for (int k = 0; k < steps_per_record; ++k) {
      drift_sum += sse_step_core(psi, model, dt, noise.gaussian(dt), hpsi, h2psi);
      ++n_steps;
    }
    record_at(double(n_steps) * dt);
  }
  if (keep_final_state) rec.final_state = PureState{std::move(psi)};
  return rec;
}

double lindblad_stable_dt(const ModelSpec& model) {
  const double s = model.ops.spin;
  const double dissipator = 2.0 * model.gamma * s * s;  // (gamma/2)(2S)^2
  const double hamiltonian = 2.0 * (s * (1.0 + 2.0 * std::abs(model.h)) + 1.0);
  return 2.0 / (dissipator + hamiltonian);
}

DensityRecord lindblad_evolve(const ModelSpec& model, const Matrix& rho0,
                              const std::vector<double>& t_grid, double dt,
                              bool store_states) {
  const int d = model.ops.dim;
  if (rho0.rows() != d || rho0.cols() != d) {
    throw ConfigError("rho0 dimension mismatch");
  }
  if (std::abs(rho0.trace().real() - 1.0) > 1e-8 ||
      std::abs(rho0.trace().imag()) > 1e-10) {
    throw ConfigError("rho0 must have unit trace");
  }
  if ((rho0 - rho0.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ConfigError("rho0 must be Hermitian");
  }
  if (t_grid.empty()) throw ConfigError("empty time grid");
  for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
    if (t_grid[i + 1] <= t_grid[i]) throw ConfigError("time grid must increase");
  }
  if (dt <= 0.0) throw ConfigError("dt must be > 0");

  DensityRecord rec;
  Matrix rho = rho0;
  Matrix k1(d, d), k2(d, d), k3(d, d), k4(d, d), tmp(d, d);

  auto rk4_step = [&](double step) {
    lindblad_rhs(model, rho, k1);
    tmp = rho + (0.5 * step) * k1;
    lindblad_rhs(model, tmp, k2);
    tmp = rho + (0.5 * step) * k2;
    lindblad_rhs(model, tmp, k3);
    tmp = rho + step * k3;
    lindblad_rhs(model, tmp, k4);
    rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const Complex tr = rho.trace();
    const double drift = std::abs(tr - Complex(1.0, 0.0));
    if (!std::isfinite(drift) || drift > 1e-6) {
      throw SolverError("Lindblad trace drift exceeded 1e-6 per step; reduce dt");
    }
    rec.max_trace_drift = std::max(rec.max_trace_drift, drift);
    rho /= tr.real();
    rho = 0.5 * (rho + rho.adjoint()).eval();
  };

  auto record_at = [&]() {
    double mz = 0.0, mz2 = 0.0;
    Complex splus{0.0, 0.0};
    const double s = model.ops.spin;
    for (int i = 0; i < d; ++i) {
      const double m = model.x_diag(i);
      const double p = rho(i, i).real();
      mz += m * p;
      mz2 += m * m * p;
      if (i + 1 < d) splus += model.raising_offd(i) * rho(i + 1, i);
    }
    const double purity = rho.squaredNorm();
    const double trace_err = std::abs(rho.trace().real() - 1.0);
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Matrix>(rho, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    if (trace_err > 1e-8 || min_eig < -1e-8 || purity <= 0.0 ||
        purity > 1.0 + 1e-8) {
      throw SolverError("density matrix left the physical set; reduce dt");
    }
    rec.mx.push_back(splus.real() / s);
    rec.my.push_back(splus.imag() / s);
    rec.mz.push_back(mz / s);
    rec.mz2.push_back(mz2 / (s * s));
    rec.mx2.push_back((rho.array() * model.mx_sq.transpose().array()).sum().real());
    rec.my2.push_back((rho.array() * model.my_sq.transpose().array()).sum().real());
    rec.purity.push_back(purity);
    rec.trace_err.push_back(trace_err);
    if (store_states) rec.states.push_back(rho);
  };

  double t = 0.0;
  for (double target : t_grid) {
    while (target - t > 1e-12) {
      const double step = std::min(dt, target - t);
      rk4_step(step);
      t += step;
    }
    rec.times.push_back(target);
    record_at();
  }
  return rec;
}

std::vector<double> adjoint_lindblad_observable(const ModelSpec& model,
                                                const Matrix& observable,
                                                const DensityRecord& rho_t) {
  const int d = model.ops.dim;
  if (observable.rows() != d || observable.cols() != d) {
    throw ConfigError("observable dimension mismatch");
  }
  if (rho_t.states.empty()) {
    throw ConfigError("DensityRecord has no stored states; rerun with store_states");
  }
  const Matrix& x = model.ops.sz;
  const Matrix xx_comm = x * (x * observable - observable * x) -
                         (x * observable - observable * x) * x;
  const Matrix generator =
      kImag * (model.hamiltonian * observable - observable * model.hamiltonian) -
      0.5 * model.gamma * xx_comm;
  std::vector<double> series;
  series.reserve(rho_t.states.size());
  for (const Matrix& rho : rho_t.states) {
    series.push_back((rho * generator).trace().real());
  }
  return series;
}

KrausPair kraus_pair(const ModelSpec& model, double lambda, double delta_t) {
  if (delta_t <= 0.0) throw ConfigError("delta_t must be > 0");
  const double gamma = lambda * lambda * delta_t;
  const int d = model.ops.dim;
  const Matrix& x = model.ops.sz;
  const Matrix base = Matrix::Identity(d, d) - kImag * delta_t * model.hamiltonian -
                      0.5 * gamma * delta_t * (x * x);
  const Matrix kick = std::sqrt(gamma * delta_t) * x;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  return {(base - kick) * inv_sqrt2, (base + kick) * inv_sqrt2, gamma};
}

TrajectoryRecord discrete_monitoring_run(const ModelSpec& model,
                                         const PureState& initial, double delta_t,
                                         int n_steps, std::uint64_t base_seed,
                                         std::uint64_t trajectory_index,
                                         int record_every) {
  if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  const auto kraus = kraus_pair(model, std::sqrt(model.gamma / delta_t), delta_t);
  OutcomeStream outcomes(base_seed, trajectory_index);

  TrajectoryRecord rec;
  rec.trajectory_index = trajectory_index;
  Vector psi = initial.amplitudes;
  double counting = 0.0;
  const double sqrt_dt = std::sqrt(delta_t);

  auto record_at = [&](int step) {
    const SpinMoments m = moments_of(model, psi);
    rec.times.push_back(step * delta_t);
    rec.mx.push_back(m.mx);
    rec.my.push_back(m.my);
    rec.mz.push_back(m.mz);
    rec.mz2.push_back(m.mz2);
    rec.norm_drift.push_back(0.0);
    rec.counting.push_back(counting);
  };

  record_at(0);
  Vector candidate(psi.size());
  for (int step = 1; step <= n_steps; ++step) {
    candidate.noalias() = kraus.l_plus * psi;
    const double p_plus = candidate.squaredNorm();
    if (outcomes.uniform() < p_plus) {
      counting += sqrt_dt;
    } else {
      counting -= sqrt_dt;
      candidate.noalias() = kraus.l_minus * psi;
    }
    psi = candidate / candidate.norm();
    if (step % record_every == 0 || step == n_steps) record_at(step);
  }
  rec.final_state = PureState{std::move(psi)};
  return rec;
}

Matrix coherent_density(const CollectiveSpinOps& ops, CoherentAngles angles) {
  const PureState psi = coherent_state(ops, angles);
  return psi.amplitudes * psi.amplitudes.adjoint();
}

}  // namespace lmg
