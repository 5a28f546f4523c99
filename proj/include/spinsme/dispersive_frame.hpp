#pragma once

// Generalized dispersive frame of a system coupled to a single driven,
// leaky cavity mode: the dressing operator X and everything derived from it.

#include <optional>
#include <string>
#include <vector>

#include "spinsme/operator_core.hpp"

namespace spinsme {

struct SystemModel {
  Matrix h_system;    // H_S, Hermitian
  Matrix coupling;    // lambda, Hermitian (system-cavity)
  Matrix bath_op;     // S, Hermitian (system-environment)
  double omega_c = 0.0;
  double omega_p = 0.0;
  Complex xi_p{0.0, 0.0};
  double kappa = 1.0;
  double eta = 1.0;
  double phi = 0.0;
  double delta = 0.0;
  // Displaced-cavity amplitude; when unset, xi_p / (i kappa) is used.
  std::optional<Complex> alpha_override;
  // Tuning field: shifts the |2> - |1> gap by `field` (two-level systems only).
  double field = 0.0;

  double dispersive_threshold = 0.2;
  double resonance_floor = 1e-6;

  Eigen::Index dim() const { return h_system.rows(); }
  Complex alpha() const;
  /// Throws ValidationError on inconsistent shapes or parameter ranges.
  void validate() const;
};

struct DispersiveFrame {
  Matrix x;            // dressing operator X
  Matrix h_system_d;   // H_S - 1/2 (X^dag lambda + lambda X)
  Matrix o_s;          // 1/2 [lambda, X^dag - X]
  Matrix lambda_op;    // 1/2 [X^dag, X]
  Matrix s_tilde;      // S - 1/2 {X^dag X, S} + X^dag S X
  Matrix q;            // (D[X] + D[X^dag]) S
  Matrix g_minus;      // -[X^dag, S]   (multiplies a)
  Matrix g_plus;       // [X, S]        (multiplies a^dag)
  double epsilon = 0.0;
  double bad_cavity_margin = 0.0;
};

struct ValidityReport {
  struct PairRatio {
    Eigen::Index j = 0, k = 0;
    double ratio = 0.0;
  };
  std::vector<PairRatio> ratios;
  double max_ratio = 0.0;
  double dispersive_threshold = 0.2;
  double epsilon = 0.0;
  double epsilon_threshold = 0.15;
  double bad_cavity_margin = 0.0;
  bool dispersive_ok = true;
  bool epsilon_ok = true;
  bool bad_cavity_ok = true;

  bool ok() const { return dispersive_ok && epsilon_ok && bad_cavity_ok; }
  /// Human-readable list of the failed criteria (empty when ok()).
  std::string failures() const;
};

/// X = sum_jk lambda_jk / (omega_c - (Omega_k - Omega_j)) |j><k| in the input basis.
Matrix build_x(const SystemModel& model);

DispersiveFrame build_frame(const SystemModel& model);

ValidityReport validity_report(const DispersiveFrame& frame, const SystemModel& model,
                               double epsilon_threshold = 0.15);

/// Largest singular value.
double spectral_norm(const Matrix& a);
/// Sum of singular values.
double trace_norm(const Matrix& a);

/// Two-level model with lambda = gamma sigma_x and S = sigma_z, levels Omega_1 < Omega_2.
SystemModel two_level_model(double omega_1, double omega_2, double gamma, double omega_c);

}  // namespace spinsme
