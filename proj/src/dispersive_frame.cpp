#include "spinsme/dispersive_frame.hpp"

#include <cmath>
#include <sstream>

namespace spinsme {

namespace {

struct Eigenbasis {
  Eigen::VectorXd levels;
  Matrix basis;  // columns are eigenvectors of H_S
};

Eigenbasis diagonalize(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("H_S eigendecomposition failed");
  // Diagonal input keeps its own ordering so that |j> labels stay meaningful.
  const bool diagonal = (h - Matrix(h.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  if (diagonal) return {h.diagonal().real(), Matrix::Identity(h.rows(), h.cols())};
  return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace

Complex SystemModel::alpha() const {
  if (alpha_override) return *alpha_override;
  return xi_p / Complex(0.0, kappa);
}

void SystemModel::validate() const {
  const auto n = h_system.rows();
  if (n == 0) throw ValidationError("system: empty Hamiltonian");
  detail::require_square(h_system.rows(), h_system.cols(), "system Hamiltonian");
  detail::require_same_shape(coupling.rows(), coupling.cols(), n, n, "coupling operator");
  detail::require_same_shape(bath_op.rows(), bath_op.cols(), n, n, "bath operator");
  if (!is_hermitian(h_system, 1e-12)) throw ValidationError("system: H_S is not Hermitian");
  if (!is_hermitian(coupling, 1e-12)) throw ValidationError("system: coupling is not Hermitian");
  if (!is_hermitian(bath_op, 1e-12)) throw ValidationError("system: bath operator is not Hermitian");
  if (!(kappa > 0.0)) throw ValidationError("system: kappa must be positive");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("system: eta must lie in [0, 1]");
  if (field != 0.0 && n != 2) throw ValidationError("system: tuning field needs a two-level system");
}

Matrix build_x(const SystemModel& model) {
  model.validate();
  const auto n = model.dim();
  const Eigenbasis eb = diagonalize(model.h_system);
  const Matrix lam = eb.basis.adjoint() * model.coupling * eb.basis;
  Matrix x = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (lam(j, k) == Complex(0.0, 0.0)) continue;
      const double denom = model.omega_c - (eb.levels(k) - eb.levels(j));
      if (std::abs(denom) < model.resonance_floor) {
        std::ostringstream msg;
        msg << "build_x: resonant denominator for pair (" << j + 1 << "," << k + 1
            << "): omega_c - (Omega_k - Omega_j) = " << denom;
        throw ValidationError(msg.str());
      }
      x(j, k) = lam(j, k) / denom;
    }
  }
  return eb.basis * x * eb.basis.adjoint();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().maxCoeff();
}

double trace_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

DispersiveFrame build_frame(const SystemModel& model) {
  DispersiveFrame f;
  f.x = build_x(model);
  const Matrix xd = f.x.adjoint();
  const Matrix& lam = model.coupling;
  const Matrix& s = model.bath_op;

  f.h_system_d = model.h_system - 0.5 * (xd * lam + lam * f.x);
  f.o_s = 0.5 * commutator(lam, xd - f.x);
  f.lambda_op = 0.5 * commutator(xd, f.x);
  f.s_tilde = s - 0.5 * anticommutator(xd * f.x, s) + xd * s * f.x;
  f.q = dissipator(f.x, s) + dissipator(xd, s);
  f.g_minus = -commutator(xd, s);
  f.g_plus = commutator(f.x, s);

  const double a2 = std::norm(model.alpha());
  f.epsilon = (spectral_norm(f.o_s) + std::abs(model.delta)) * (1.0 + a2) / model.kappa;
  f.bad_cavity_margin = model.kappa - trace_norm(f.o_s) * (1.0 + a2);
  return f;
}

ValidityReport validity_report(const DispersiveFrame& frame, const SystemModel& model,
                               double epsilon_threshold) {
  ValidityReport r;
  r.dispersive_threshold = model.dispersive_threshold;
  r.epsilon = frame.epsilon;
  r.epsilon_threshold = epsilon_threshold;
  r.bad_cavity_margin = frame.bad_cavity_margin;

  const Eigenbasis eb = diagonalize(model.h_system);
  const Matrix lam = eb.basis.adjoint() * model.coupling * eb.basis;
  for (Eigen::Index j = 0; j < lam.rows(); ++j) {
    for (Eigen::Index k = 0; k < lam.cols(); ++k) {
      if (lam(j, k) == Complex(0.0, 0.0)) continue;
      const double denom = std::abs(model.omega_c - (eb.levels(k) - eb.levels(j)));
      const double ratio = denom > 0.0 ? std::abs(lam(j, k)) / denom
                                       : std::numeric_limits<double>::infinity();
      r.ratios.push_back({j, k, ratio});
      r.max_ratio = std::max(r.max_ratio, ratio);
    }
  }
  r.dispersive_ok = r.max_ratio < r.dispersive_threshold;
  r.epsilon_ok = r.epsilon < epsilon_threshold;
  r.bad_cavity_ok = r.bad_cavity_margin > 0.0;
  return r;
}

std::string ValidityReport::failures() const {
  std::ostringstream out;
  if (!dispersive_ok) {
    out << "dispersive condition violated: max |lambda_jk|/|omega_c - (Omega_k - Omega_j)| = "
        << max_ratio << " >= " << dispersive_threshold << "; ";
  }
  if (!epsilon_ok) {
    out << "high-leakage condition violated: epsilon = " << epsilon << " >= " << epsilon_threshold
        << "; ";
  }
  if (!bad_cavity_ok) {
    out << "bad-cavity criterion violated: kappa - ||O_S||_1 (1 + |alpha|^2) = "
        << bad_cavity_margin << " <= 0; ";
  }
  return out.str();
}

SystemModel two_level_model(double omega_1, double omega_2, double gamma, double omega_c) {
  SystemModel m;
  m.h_system = Matrix::Zero(2, 2);
  m.h_system(0, 0) = omega_1;
  m.h_system(1, 1) = omega_2;
  m.coupling = gamma * qubit::sigma_x();
  m.bath_op = qubit::sigma_z();
  m.omega_c = omega_c;
  m.omega_p = omega_c;
  return m;
}

}  // namespace spinsme
