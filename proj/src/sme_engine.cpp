#include "spinsme/sme_engine.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "spinsme/parallel.hpp"
#include "spinsme/spectroscopy.hpp"

namespace spinsme {

namespace {

constexpr double kTraceAbort = 1e-6;
constexpr std::size_t kChunk = 32;

Matrix field_hamiltonian(const SystemModel& model) {
  if (model.field == 0.0) return Matrix::Zero(model.dim(), model.dim());
  // Shifts E_2 - E_1 by `field`.
  return -0.5 * model.field * qubit::sigma_z();
}

Matrix hermitize(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

void check_trace(const Matrix& rho, double t) {
  const double err = std::abs(rho.trace() - Complex(1.0, 0.0));
  if (!(err <= kTraceAbort) || !rho.allFinite()) {
    std::ostringstream msg;
    msg << "SME step aborted at t = " << t << ": trace drift " << err
        << " exceeds 1e-6 (reduce dt)";
    throw NumericalError(msg.str());
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void SimParams::validate(bool full_model) const {
  if (!(dt > 0.0)) throw ValidationError("sim: dt must be positive");
  if (!(T >= dt)) throw ValidationError("sim: T must be at least dt");
  if (trajectories < 1) throw ValidationError("sim: need at least one trajectory");
  if (store_stride < 1) throw ValidationError("sim: store_stride must be >= 1");
  if (bin_steps < 1) throw ValidationError("sim: bin_steps must be >= 1");
  if (full_model && fock_cutoff < 2) throw ValidationError("sim: fock_cutoff must be >= 2");
}

long SimParams::steps() const { return std::lround(T / dt); }

std::uint64_t child_seed(std::uint64_t master, std::uint64_t sector, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ (sector + 0x632be59bd9b4e019ULL)) ^
                    (index + 0x1b873593ULL));
}

// ---------------------------------------------------------------------------
// Reduced model

ReducedModel::ReducedModel(SystemModel model, DispersiveFrame frame, bool include_alpha_corrections)
    : model_(std::move(model)), frame_(std::move(frame)),
      alpha_corrections_(include_alpha_corrections) {
  model_.validate();
  const Complex alpha = model_.alpha();
  const double a2 = std::norm(alpha);
  const double kappa = model_.kappa;
  const double delta = model_.delta;
  const double lorentz = kappa * kappa + delta * delta;
  const double drive = 2.0 * (model_.xi_p * std::conj(alpha)).real();  // xi a* + xi* a

  h_base_ = frame_.h_system_d + field_hamiltonian(model_) + drive * frame_.lambda_op +
            a2 * frame_.o_s - (delta * a2 / lorentz) * frame_.o_s * frame_.o_s;

  bath_coupling_ = frame_.s_tilde;
  if (alpha_corrections_) {
    bath_coupling_ += a2 * frame_.q + alpha * frame_.g_minus + std::conj(alpha) * frame_.g_plus;
  }
  if (!is_hermitian(h_base_, 1e-10) || !is_hermitian(bath_coupling_, 1e-10)) {
    throw NumericalError("reduced model: effective Hamiltonian is not Hermitian");
  }
  h_base_ = hermitize(h_base_);
  bath_coupling_ = hermitize(bath_coupling_);

  // Photon shot-noise dephasing. The factor 2 matches elimination of the 2 kappa leak
  // in FullModel; the bare kappa/(kappa^2+Delta^2) rate undercounts it by half.
  jumps_ = {{kappa, frame_.x}, {2.0 * kappa * a2 / lorentz, frame_.o_s}};

  measurement_ = build_measurement_operator(model_, frame_).c;
}

Matrix ReducedModel::hamiltonian(double theta) const { return h_base_ + theta * bath_coupling_; }

Superoperator ReducedModel::generator(double theta) const {
  return liouvillian(hamiltonian(theta), jumps_);
}

double ReducedModel::measurement_strength() const { return 2.0 * model_.eta * model_.kappa; }

Matrix ReducedModel::drift(const Matrix& rho, double theta) const {
  const Matrix h = hamiltonian(theta);
  Matrix out = Complex(0.0, -1.0) * commutator(h, rho);
  for (const auto& j : jumps_) {
    if (j.rate != 0.0) out += j.rate * dissipator(j.op, rho);
  }
  return out;
}

Matrix step_reduced(const Matrix& rho, const ReducedModel& model, double theta, double dt,
                    double dW) {
  if (!std::isfinite(dW)) throw ValidationError("step_reduced: non-finite Wiener increment");
  const double s = std::sqrt(model.measurement_strength());
  Matrix next = rho + model.drift(rho, theta) * dt;
  if (s != 0.0) next += s * dW * measurement_superop(model.measurement_operator(), rho);
  next = hermitize(next);
  check_trace(next, 0.0);
  return next;
}

ReducedStepper::ReducedStepper(const ReducedModel& model, double theta, double dt, Scheme scheme,
                               bool clamp_positivity)
    : model_(&model), theta_(theta), dt_(dt), scheme_(scheme), clamp_(clamp_positivity),
      sqrt_strength_(std::sqrt(model.measurement_strength())) {
  const Superoperator gen = model.generator(theta);
  if (scheme_ == Scheme::ExponentialEuler) {
    step_map_ = propagator(gen, dt_);
  } else {
    step_map_ = Matrix::Identity(gen.matrix().rows(), gen.matrix().cols()) + gen.matrix() * dt_;
  }
}

double ReducedStepper::step(Matrix& rho, double dW) const {
  const Matrix& m = model_->measurement_operator();
  const Matrix m_rho = m * rho;
  const double expect = 2.0 * m_rho.trace().real();  // Tr[(m + m^dag) rho]
  const double dQ = sqrt_strength_ * (sqrt_strength_ * expect * dt_ + dW);

  Vector v = step_map_ * vec(rho);
  Matrix next = unvec(v);
  if (sqrt_strength_ != 0.0) {
    next += (sqrt_strength_ * dW) * (m_rho + m_rho.adjoint() - expect * rho);
  }
  next = hermitize(next);
  if (clamp_) next = clamp_to_state(next);
  rho = std::move(next);
  return dQ;
}

TrajectoryRecord simulate_trajectory(const ReducedModel& model, double theta, const Matrix& rho0,
                                     const SimParams& params, std::uint64_t seed) {
  params.validate();
  if (!is_density_matrix(rho0)) throw ValidationError("simulate_trajectory: invalid initial state");
  const ReducedStepper stepper(model, theta, params.dt, params.scheme, params.clamp_positivity);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(params.dt));

  TrajectoryRecord rec;
  rec.seed = seed;
  rec.theta = theta;
  rec.bin_width = params.bin_steps * params.dt;
  const long n = params.steps();
  rec.times.reserve(n / params.store_stride + 2);
  rec.states.reserve(n / params.store_stride + 2);
  rec.current.reserve(n / params.bin_steps + 1);

  Matrix rho = rho0;
  rec.times.push_back(0.0);
  rec.states.push_back(rho);
  double bin_acc = 0.0;
  int in_bin = 0;
  for (long k = 1; k <= n; ++k) {
    const double dW = normal(rng);
    bin_acc += stepper.step(rho, dW);
    const double t = k * params.dt;
    check_trace(rho, t);
    if (++in_bin == params.bin_steps) {
      rec.current_times.push_back(t - 0.5 * rec.bin_width);
      rec.current.push_back(bin_acc / rec.bin_width);
      bin_acc = 0.0;
      in_bin = 0;
    }
    if (k % params.store_stride == 0 || k == n) {
      rec.times.push_back(t);
      rec.states.push_back(rho);
    }
  }
  return rec;
}

EnsembleResult run_ensemble(const ReducedModel& model, const std::vector<ThetaSector>& sectors,
                            const Matrix& rho0, const SimParams& params, unsigned threads) {
  params.validate();
  if (sectors.empty()) throw ValidationError("run_ensemble: no bath sectors");
  const std::size_t m = static_cast<std::size_t>(params.trajectories);
  const std::size_t chunks_per_sector = (m + kChunk - 1) / kChunk;
  const std::size_t jobs = sectors.size() * chunks_per_sector;

  // Per-chunk sums with a fixed layout; reduced in index order afterwards.
  std::vector<std::vector<Matrix>> sums(jobs);
  std::vector<double> times;
  parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t sector = job / chunks_per_sector;
    const std::size_t chunk = job % chunks_per_sector;
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(m, begin + kChunk);
    std::vector<Matrix> acc;
    for (std::size_t i = begin; i < end; ++i) {
      SimParams p = params;
      p.bin_steps = 1;
      const auto rec = simulate_trajectory(model, sectors[sector].theta, rho0, p,
                                           child_seed(params.seed, sector, i));
      if (acc.empty()) {
        acc = rec.states;
      } else {
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += rec.states[k];
      }
      if (job == 0 && i == begin) times = rec.times;
    }
    sums[job] = std::move(acc);
  });

  EnsembleResult out;
  out.times = times;
  out.sectors = sectors;
  out.trajectories_per_sector = params.trajectories;
  out.mean.assign(times.size(), Matrix::Zero(rho0.rows(), rho0.cols()));
  for (std::size_t s = 0; s < sectors.size(); ++s) {
    std::vector<Matrix> sector_sum(times.size(), Matrix::Zero(rho0.rows(), rho0.cols()));
    for (std::size_t c = 0; c < chunks_per_sector; ++c) {
      const auto& part = sums[s * chunks_per_sector + c];
      for (std::size_t k = 0; k < times.size(); ++k) sector_sum[k] += part[k];
    }
    const double w = sectors[s].weight / static_cast<double>(m);
    for (std::size_t k = 0; k < times.size(); ++k) out.mean[k] += w * sector_sum[k];
  }
  return out;
}

std::vector<TrajectoryRecord> run_records(const ReducedModel& model,
                                          const std::vector<ThetaSector>& sectors,
                                          const Matrix& rho0, const SimParams& params,
                                          unsigned threads) {
  params.validate();
  const std::size_t m = static_cast<std::size_t>(params.trajectories);
  std::vector<TrajectoryRecord> out(sectors.size() * m);
  parallel_for(out.size(), threads, [&](std::size_t job) {
    const std::size_t sector = job / m;
    const std::size_t i = job % m;
    out[job] = simulate_trajectory(model, sectors[sector].theta, rho0, params,
                                   child_seed(params.seed, sector, i));
  });
  return out;
}

std::vector<double> uniform_times(double T, double dt_out) {
  if (!(dt_out > 0.0) || !(T >= 0.0)) throw ValidationError("uniform_times: bad grid");
  const long n = std::lround(T / dt_out);
  std::vector<double> t(n + 1);
  for (long k = 0; k <= n; ++k) t[k] = k * dt_out;
  return t;
}

std::vector<Matrix> unconditional_evolve(const ReducedModel& model, const BathSpec& bath,
                                         const Matrix& rho0, double T, double dt_out,
                                         double t_ref, int n_nodes) {
  validate(bath);
  const auto times = uniform_times(T, dt_out);
  std::vector<Matrix> out(times.size(), Matrix::Zero(rho0.rows(), rho0.cols()));

  const auto* scaled = std::get_if<GaussianScaledBath>(&bath);
  if (scaled && std::abs(scaled->p - 2.0) > 1e-12) {
    const Matrix& s = model.model().bath_op;
    if ((s - Matrix(s.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-12) {
      throw ValidationError("unconditional_evolve: time-dependent dephasing needs a diagonal S");
    }
    const Matrix step = propagator(model.generator(0.0), dt_out);
    Vector v = vec(rho0);
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (k > 0) v = step * v;
      Matrix rho = unvec(v);
      const double t = times[k];
      if (t > 0.0) {
        const double spread = theta_variance(bath, t) * t * t;
        for (Eigen::Index i = 0; i < rho.rows(); ++i)
          for (Eigen::Index j = 0; j < rho.cols(); ++j) {
            const double ds = (s(i, i) - s(j, j)).real();
            rho(i, j) *= std::exp(-0.5 * spread * ds * ds);
          }
      }
      out[k] = rho;
    }
    return out;
  }

  for (const auto& sector : sectors_for(bath, t_ref, n_nodes)) {
    const Matrix step = propagator(model.generator(sector.theta), dt_out);
    Vector v = vec(rho0);
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (k > 0) v = step * v;
      out[k] += sector.weight * unvec(v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full system + cavity model

FullModel::FullModel(SystemModel model, DispersiveFrame frame, int fock_cutoff)
    : model_(std::move(model)), frame_(std::move(frame)), cutoff_(fock_cutoff) {
  model_.validate();
  if (cutoff_ < 2) throw ValidationError("full model: fock_cutoff must be >= 2");
}

Complex FullModel::cavity_amplitude() const {
  return Complex(0.0, -1.0) * model_.xi_p / Complex(model_.kappa, model_.omega_c - model_.omega_p);
}

Matrix FullModel::hamiltonian(double theta) const {
  const auto n = model_.dim();
  const Matrix is = Matrix::Identity(n, n);
  const Matrix ic = Matrix::Identity(cutoff_, cutoff_);
  const Matrix a = annihilation(cutoff_);
  const Matrix ad = a.adjoint();
  const Matrix num = ad * a;
  const Matrix dressed = is + frame_.lambda_op;
  const Complex xi = model_.xi_p;

  Matrix h = kron(Matrix(frame_.h_system_d + field_hamiltonian(model_)), ic) +
             (model_.omega_c - model_.omega_p) * kron(is, num) + kron(frame_.o_s, num) +
             xi * kron(dressed, ad) + std::conj(xi) * kron(dressed, a);
  if (theta != 0.0) {
    h += theta * (kron(frame_.s_tilde, ic) + kron(frame_.q, num) + kron(frame_.g_minus, a) +
                  kron(frame_.g_plus, ad));
  }
  return hermitize(h);
}

std::vector<Jump> FullModel::jumps() const {
  const auto n = model_.dim();
  const Matrix is = Matrix::Identity(n, n);
  const Matrix ic = Matrix::Identity(cutoff_, cutoff_);
  // Leakage at 2 kappa: amplitude decay rate kappa, matching alpha = xi/(i kappa)
  // and the sqrt(2 eta kappa) homodyne prefactor.
  return {{model_.kappa, kron(frame_.x, ic)},
          {2.0 * model_.kappa, kron(Matrix(is + frame_.lambda_op), annihilation(cutoff_))}};
}

Superoperator FullModel::generator(double theta) const {
  return liouvillian(hamiltonian(theta), jumps());
}

Matrix FullModel::measurement_operator() const {
  const auto n = model_.dim();
  const Matrix is = Matrix::Identity(n, n);
  return kron(Matrix(is + frame_.lambda_op), annihilation(cutoff_)) *
         std::exp(Complex(0.0, -model_.phi));
}

Matrix FullModel::initial_state(const Matrix& rho_system) const {
  return kron(rho_system, coherent_state(cavity_amplitude(), cutoff_));
}

Matrix FullModel::reduce(const Matrix& rho_full) const {
  return partial_trace(rho_full, {model_.dim(), cutoff_}, 1);
}

double FullModel::truncation_leakage(const Matrix& rho_full) const {
  const Matrix cav = partial_trace(rho_full, {model_.dim(), cutoff_}, 0);
  return (cav(cutoff_ - 1, cutoff_ - 1) + cav(cutoff_ - 2, cutoff_ - 2)).real();
}

FullEvolution full_unconditional_evolve(const FullModel& model,
                                        const std::vector<ThetaSector>& sectors,
                                        const Matrix& rho0_system, double T, double dt_out) {
  FullEvolution out;
  out.times = uniform_times(T, dt_out);
  out.system_states.assign(out.times.size(),
                           Matrix::Zero(rho0_system.rows(), rho0_system.cols()));
  const Matrix rho0 = model.initial_state(rho0_system);
  for (const auto& sector : sectors) {
    const Matrix step = propagator(model.generator(sector.theta), dt_out);
    Vector v = vec(rho0);
    for (std::size_t k = 0; k < out.times.size(); ++k) {
      if (k > 0) v = step * v;
      const Matrix rho = unvec(v);
      out.max_leakage = std::max(out.max_leakage, model.truncation_leakage(rho));
      out.system_states[k] += sector.weight * model.reduce(rho);
    }
  }
  if (out.max_leakage > kTruncationError) {
    throw NumericalError("full model: Fock truncation leakage " + std::to_string(out.max_leakage) +
                         " exceeds 1e-2; raise fock_cutoff");
  }
  out.truncation_warning = out.max_leakage > kTruncationWarn;
  return out;
}

TrajectoryRecord simulate_full(const FullModel& model, double theta, const Matrix& rho0_system,
                               const SimParams& params, std::uint64_t seed) {
  params.validate(true);
  const Matrix h = model.hamiltonian(theta);
  const auto jumps = model.jumps();
  const Matrix c = model.measurement_operator();
  const double s = std::sqrt(2.0 * model.model().eta * model.model().kappa);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(params.dt));
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.theta = theta;
  rec.bin_width = params.bin_steps * params.dt;
  Matrix rho = model.initial_state(rho0_system);
  rec.times.push_back(0.0);
  rec.states.push_back(model.reduce(rho));
  const long n = params.steps();
  double bin_acc = 0.0;
  int in_bin = 0;
  for (long k = 1; k <= n; ++k) {
    const double dW = normal(rng);
    const Matrix c_rho = c * rho;
    const double expect = 2.0 * c_rho.trace().real();
    bin_acc += s * (s * expect * params.dt + dW);
    Matrix drift = Complex(0.0, -1.0) * commutator(h, rho);
    for (const auto& j : jumps) drift += j.rate * dissipator(j.op, rho);
    Matrix next = rho + drift * params.dt;
    if (s != 0.0) next += (s * dW) * (c_rho + c_rho.adjoint() - expect * rho);
    rho = hermitize(next);
    if (params.clamp_positivity) rho = clamp_to_state(rho);
    const double t = k * params.dt;
    check_trace(rho, t);
    rec.truncation_leakage = std::max(rec.truncation_leakage, model.truncation_leakage(rho));
    if (++in_bin == params.bin_steps) {
      rec.current_times.push_back(t - 0.5 * rec.bin_width);
      rec.current.push_back(bin_acc / rec.bin_width);
      bin_acc = 0.0;
      in_bin = 0;
    }
    if (k % params.store_stride == 0 || k == n) {
      rec.times.push_back(t);
      rec.states.push_back(model.reduce(rho));
    }
  }
  if (rec.truncation_leakage > kTruncationError) {
    throw NumericalError("full model: Fock truncation leakage exceeds 1e-2; raise fock_cutoff");
  }
  return rec;
}

}  // namespace spinsme
