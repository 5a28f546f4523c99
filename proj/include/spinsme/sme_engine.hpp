#pragma once

// Stochastic master equations for continuous homodyne readout.
//
// ReducedModel: the cavity-eliminated system SME per bath sector theta,
//   d rho = L_theta rho dt + sqrt(2 eta kappa) H[m] rho dW,
//   dQ    = 2 eta kappa <m + m^dag> dt + sqrt(2 eta kappa) dW,
// with m = alpha/(kappa + i Delta) (i(1 + Lambda) + kappa Lambda^2) e^{-i phi}.
//
// FullModel: system (x) truncated cavity in the frame rotating with the drive,
// used as an oracle for the elimination.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spinsme/dispersive_frame.hpp"
#include "spinsme/operator_core.hpp"
#include "spinsme/spin_bath.hpp"

namespace spinsme {

enum class Scheme {
  EulerMaruyama,   // rho + L rho dt + b dW
  ExponentialEuler // exp(L dt) rho + b dW; the ensemble mean is the exact ME flow
};

struct SimParams {
  double dt = 1e-3;
  double T = 1.0;
  int trajectories = 1;
  int fock_cutoff = 10;
  int store_stride = 1;
  int bin_steps = 1;  // integration steps per current sample
  std::uint64_t seed = 0;
  bool clamp_positivity = false;
  bool include_alpha_corrections = false;
  Scheme scheme = Scheme::EulerMaruyama;

  void validate(bool full_model = false) const;
  long steps() const;
};

struct TrajectoryRecord {
  std::vector<double> times;          // state sample times
  std::vector<Matrix> states;         // conditioned system states at `times`
  std::vector<double> current_times;  // bin midpoints
  std::vector<double> current;        // I_k = dQ_k / bin width
  double bin_width = 0.0;
  std::uint64_t seed = 0;
  double theta = 0.0;
  // Full-model runs only: max population in the top two Fock levels.
  double truncation_leakage = 0.0;
};

/// Stable child seed for (master, sector, trajectory); splitmix64 mixing.
std::uint64_t child_seed(std::uint64_t master, std::uint64_t sector, std::uint64_t index);

class ReducedModel {
 public:
  ReducedModel(SystemModel model, DispersiveFrame frame, bool include_alpha_corrections);

  const SystemModel& model() const { return model_; }
  const DispersiveFrame& frame() const { return frame_; }
  bool alpha_corrections() const { return alpha_corrections_; }

  /// Effective system-bath operator multiplying theta.
  const Matrix& bath_coupling() const { return bath_coupling_; }
  Matrix hamiltonian(double theta) const;
  const std::vector<Jump>& jumps() const { return jumps_; }
  Superoperator generator(double theta) const;
  /// Measurement operator m without the sqrt(2 eta kappa) prefactor.
  const Matrix& measurement_operator() const { return measurement_; }
  double measurement_strength() const;  // 2 eta kappa

  /// L_theta rho evaluated directly (no superoperator).
  Matrix drift(const Matrix& rho, double theta) const;

 private:
  SystemModel model_;
  DispersiveFrame frame_;
  bool alpha_corrections_;
  Matrix h_base_;
  Matrix bath_coupling_;
  std::vector<Jump> jumps_;
  Matrix measurement_;
};

/// One Euler-Maruyama step of the reduced SME in sector theta. Throws
/// NumericalError if the trace drifts by more than 1e-6.
Matrix step_reduced(const Matrix& rho, const ReducedModel& model, double theta, double dt,
                    double dW);

/// Precomputed per-sector stepper (supports both schemes).
class ReducedStepper {
 public:
  ReducedStepper(const ReducedModel& model, double theta, double dt, Scheme scheme,
                 bool clamp_positivity = false);
  /// Advances rho in place and returns the current increment dQ.
  double step(Matrix& rho, double dW) const;
  double theta() const { return theta_; }

 private:
  const ReducedModel* model_;
  double theta_;
  double dt_;
  Scheme scheme_;
  bool clamp_;
  Matrix step_map_;  // exp(L dt) or (1 + L dt) on vec(rho)
  double sqrt_strength_;
};

TrajectoryRecord simulate_trajectory(const ReducedModel& model, double theta, const Matrix& rho0,
                                     const SimParams& params, std::uint64_t seed);

struct EnsembleResult {
  std::vector<double> times;
  std::vector<Matrix> mean;  // sector-weighted mean of conditioned states
  std::vector<ThetaSector> sectors;
  int trajectories_per_sector = 0;
};

/// Runs params.trajectories trajectories per sector and mixes sector means by
/// weight. Deterministic for a given seed regardless of thread count.
EnsembleResult run_ensemble(const ReducedModel& model, const std::vector<ThetaSector>& sectors,
                            const Matrix& rho0, const SimParams& params,
                            unsigned threads = 0);

/// Trajectory records for every (sector, index), sector-major.
std::vector<TrajectoryRecord> run_records(const ReducedModel& model,
                                          const std::vector<ThetaSector>& sectors,
                                          const Matrix& rho0, const SimParams& params,
                                          unsigned threads = 0);

/// Unconditional evolution on a uniform time grid 0, dt_out, ..., T.
/// Discrete and static-width Gaussian baths are mixed sector by sector;
/// GaussianScaled with p != 2 evolves the bath-free generator and multiplies
/// coherences by the time-dependent Gaussian envelope.
std::vector<Matrix> unconditional_evolve(const ReducedModel& model, const BathSpec& bath,
                                         const Matrix& rho0, double T, double dt_out,
                                         double t_ref = 1.0, int n_nodes = 24);

std::vector<double> uniform_times(double T, double dt_out);

class FullModel {
 public:
  FullModel(SystemModel model, DispersiveFrame frame, int fock_cutoff);

  const SystemModel& model() const { return model_; }
  const DispersiveFrame& frame() const { return frame_; }
  Eigen::Index system_dim() const { return model_.dim(); }
  int cutoff() const { return cutoff_; }
  /// Steady cavity amplitude -i xi_p / (kappa + i (omega_c - omega_p)).
  Complex cavity_amplitude() const;

  Matrix hamiltonian(double theta) const;
  std::vector<Jump> jumps() const;
  Superoperator generator(double theta) const;
  /// a (1 + Lambda) e^{-i phi}, without prefactor.
  Matrix measurement_operator() const;
  /// System state (x) coherent cavity state at cavity_amplitude().
  Matrix initial_state(const Matrix& rho_system) const;
  Matrix reduce(const Matrix& rho_full) const;
  /// Population of the top two Fock levels.
  double truncation_leakage(const Matrix& rho_full) const;

 private:
  SystemModel model_;
  DispersiveFrame frame_;
  int cutoff_;
};

inline constexpr double kTruncationWarn = 1e-4;
inline constexpr double kTruncationError = 1e-2;

struct FullEvolution {
  std::vector<double> times;
  std::vector<Matrix> system_states;
  double max_leakage = 0.0;
  bool truncation_warning = false;
};

/// Unconditional full-model evolution, sector-mixed, reduced to the system.
FullEvolution full_unconditional_evolve(const FullModel& model,
                                        const std::vector<ThetaSector>& sectors,
                                        const Matrix& rho0_system, double T, double dt_out);

/// One stochastic full-model trajectory (Euler-Maruyama) in sector theta.
TrajectoryRecord simulate_full(const FullModel& model, double theta, const Matrix& rho0_system,
                               const SimParams& params, std::uint64_t seed);

}  // namespace spinsme
