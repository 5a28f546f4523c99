#pragma once

// Dense operator algebra on small Hilbert spaces: commutators, Lindblad and
// homodyne-innovation superoperators, Liouvillian assembly, propagation and
// steady states.
//
// Vectorization is column stacking throughout: vec(A rho B) = (B^T kron A) vec(rho).
// Eigen stores matrices column-major, so vec/unvec are plain reshapes.

#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace spinsme {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

template <typename Scalar>
using OperatorT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_square(Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (rows != cols) {
    throw DimensionError(std::string(what) + ": operator is not square (" + std::to_string(rows) +
                         "x" + std::to_string(cols) + ")");
  }
}

inline void require_same_shape(Eigen::Index r1, Eigen::Index c1, Eigen::Index r2, Eigen::Index c2,
                               const char* what) {
  if (r1 != r2 || c1 != c2) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(r1) + "x" +
                         std::to_string(c1) + " vs " + std::to_string(r2) + "x" +
                         std::to_string(c2) + ")");
  }
}

}  // namespace detail

template <typename Derived>
auto dagger(const Eigen::MatrixBase<Derived>& a) {
  return a.adjoint().eval();
}

template <typename DA, typename DB>
auto commutator(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "commutator");
  return (a * b - b * a).eval();
}

template <typename DA, typename DB>
auto anticommutator(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "anticommutator");
  return (a * b + b * a).eval();
}

template <typename DA, typename DB>
auto kron(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                            a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

/// Traces out tensor factor `traced` of a state on the product space with the
/// given factor dimensions (first factor is the slowest index in kron order).
template <typename Derived>
auto partial_trace(const Eigen::MatrixBase<Derived>& rho, const std::vector<Eigen::Index>& dims,
                   std::size_t traced) {
  using Scalar = typename Derived::Scalar;
  if (traced >= dims.size()) throw DimensionError("partial_trace: no such tensor factor");
  Eigen::Index total = 1;
  for (auto d : dims) total *= d;
  detail::require_same_shape(rho.rows(), rho.cols(), total, total, "partial_trace");

  Eigen::Index outer = 1, inner = 1;
  for (std::size_t k = 0; k < traced; ++k) outer *= dims[k];
  for (std::size_t k = traced + 1; k < dims.size(); ++k) inner *= dims[k];
  const Eigen::Index mid = dims[traced];
  const Eigen::Index kept = outer * inner;

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(kept, kept);
  for (Eigen::Index o1 = 0; o1 < outer; ++o1)
    for (Eigen::Index i1 = 0; i1 < inner; ++i1)
      for (Eigen::Index o2 = 0; o2 < outer; ++o2)
        for (Eigen::Index i2 = 0; i2 < inner; ++i2) {
          Scalar acc{0};
          for (Eigen::Index m = 0; m < mid; ++m) {
            acc += rho((o1 * mid + m) * inner + i1, (o2 * mid + m) * inner + i2);
          }
          out(o1 * inner + i1, o2 * inner + i2) = acc;
        }
  return out;
}

/// D[L]rho = L rho L^dag - 1/2 {L^dag L, rho}
template <typename DL, typename DR>
auto dissipator(const Eigen::MatrixBase<DL>& l, const Eigen::MatrixBase<DR>& rho) {
  detail::require_square(l.rows(), l.cols(), "dissipator");
  detail::require_same_shape(l.rows(), l.cols(), rho.rows(), rho.cols(), "dissipator");
  const auto ldl = (l.adjoint() * l).eval();
  return (l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl)).eval();
}

/// Homodyne innovation H[c]rho = c rho + rho c^dag - Tr[(c + c^dag) rho] rho.
/// Requires a unit-trace state; the result is traceless.
template <typename DC, typename DR>
auto measurement_superop(const Eigen::MatrixBase<DC>& c, const Eigen::MatrixBase<DR>& rho,
                         double trace_tol = 1e-6) {
  detail::require_square(c.rows(), c.cols(), "measurement_superop");
  detail::require_same_shape(c.rows(), c.cols(), rho.rows(), rho.cols(), "measurement_superop");
  const auto tr = rho.trace();
  if (std::abs(tr - typename DR::Scalar(1)) > trace_tol) {
    throw ValidationError("measurement_superop: state trace " + std::to_string(std::real(tr)) +
                          " is not 1");
  }
  const auto c_rho = (c * rho).eval();
  const auto expect = (c_rho.trace() + std::conj(c_rho.trace()));
  return (c_rho + c_rho.adjoint() - expect * rho).eval();
}

template <typename Derived>
Vector vec(const Eigen::MatrixBase<Derived>& rho) {
  Matrix m = rho;
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size()) throw DimensionError("unvec: length is not a perfect square");
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

/// Row functional rho -> Tr[A rho] in the column-stacked representation.
template <typename Derived>
Vector trace_functional(const Eigen::MatrixBase<Derived>& a) {
  // Tr[A rho] = sum_ij A_ji rho_ij = vec(A^T) . vec(rho)
  return vec(a.transpose());
}

/// Matrix acting on column-stacked density matrices of a `dim`-level system.
class Superoperator {
 public:
  Superoperator() = default;
  explicit Superoperator(Matrix m) : matrix_(std::move(m)) {
    detail::require_square(matrix_.rows(), matrix_.cols(), "Superoperator");
    dim_ = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(matrix_.rows()))));
    if (dim_ * dim_ != matrix_.rows()) throw DimensionError("Superoperator: size is not n^2");
  }

  static Superoperator zero(Eigen::Index dim) {
    return Superoperator(Matrix::Zero(dim * dim, dim * dim));
  }

  const Matrix& matrix() const { return matrix_; }
  Eigen::Index dim() const { return dim_; }

  template <typename Derived>
  Matrix apply(const Eigen::MatrixBase<Derived>& rho) const {
    detail::require_same_shape(rho.rows(), rho.cols(), dim_, dim_, "Superoperator::apply");
    return unvec(matrix_ * vec(rho));
  }

  /// Largest |(vec(I)^dag L)_k|; zero for a trace-preserving generator.
  double trace_defect() const {
    const Vector id = vec(Matrix::Identity(dim_, dim_));
    return (id.adjoint() * matrix_).cwiseAbs().maxCoeff();
  }

  Superoperator& operator+=(const Superoperator& other) {
    detail::require_same_shape(matrix_.rows(), matrix_.cols(), other.matrix_.rows(),
                               other.matrix_.cols(), "Superoperator::operator+=");
    matrix_ += other.matrix_;
    return *this;
  }

 private:
  Matrix matrix_;
  Eigen::Index dim_ = 0;
};

inline Superoperator operator+(Superoperator a, const Superoperator& b) { return a += b; }

struct Jump {
  double rate = 0.0;
  Matrix op;
};

/// Generator of -i[H, .] alone.
inline Superoperator hamiltonian_superop(const Matrix& h) {
  const auto n = h.rows();
  const Matrix id = Matrix::Identity(n, n);
  return Superoperator(Complex(0, -1) * (kron(id, h) - kron(h.transpose(), id)));
}

/// Generator of rate * D[L].
inline Superoperator dissipator_superop(const Matrix& l, double rate) {
  const auto n = l.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix ldl = l.adjoint() * l;
  return Superoperator(rate * (kron(l.conjugate(), l) - 0.5 * kron(id, ldl) -
                               0.5 * kron(ldl.transpose(), id)));
}

/// Lindblad generator -i[H, .] + sum_k rate_k D[L_k].
inline Superoperator liouvillian(const Matrix& h, const std::vector<Jump>& jumps,
                                 double herm_tol = 1e-10) {
  detail::require_square(h.rows(), h.cols(), "liouvillian");
  if (!h.allFinite()) throw ValidationError("liouvillian: Hamiltonian has non-finite entries");
  if (!is_hermitian(h, herm_tol)) throw ValidationError("liouvillian: Hamiltonian is not Hermitian");
  Superoperator gen = hamiltonian_superop(h);
  for (const auto& j : jumps) {
    if (j.rate < 0.0) throw ValidationError("liouvillian: negative jump rate");
    detail::require_same_shape(j.op.rows(), j.op.cols(), h.rows(), h.cols(), "liouvillian");
    if (j.rate == 0.0) continue;
    gen += dissipator_superop(j.op, j.rate);
  }
  return gen;
}

/// exp(L t) as a matrix (Pade scaling and squaring).
inline Matrix propagator(const Superoperator& gen, double t) {
  if (t < 0.0) throw ValidationError("propagator: negative time");
  if (t == 0.0) return Matrix::Identity(gen.matrix().rows(), gen.matrix().cols());
  return (gen.matrix() * Complex(t, 0.0)).exp();
}

template <typename Derived>
Matrix propagate(const Superoperator& gen, const Eigen::MatrixBase<Derived>& rho0, double t) {
  detail::require_same_shape(rho0.rows(), rho0.cols(), gen.dim(), gen.dim(), "propagate");
  if (t == 0.0) return rho0;
  return unvec(propagator(gen, t) * vec(rho0));
}

/// Eigendecomposition of a generator, with the split between the stationary
/// kernel (|lambda| < kernel_tol) and the remaining modes.
class SpectralDecomposition {
 public:
  explicit SpectralDecomposition(const Superoperator& gen, double kernel_tol = 1e-9)
      : kernel_tol_(kernel_tol) {
    Eigen::ComplexEigenSolver<Matrix> solver(gen.matrix());
    if (solver.info() != Eigen::Success) throw NumericalError("generator eigendecomposition failed");
    values_ = solver.eigenvalues();
    vectors_ = solver.eigenvectors();
    Eigen::PartialPivLU<Matrix> lu(vectors_);
    inverse_ = lu.inverse();
    if (!inverse_.allFinite()) throw NumericalError("generator is not diagonalizable");
  }

  const Vector& eigenvalues() const { return values_; }
  const Matrix& eigenvectors() const { return vectors_; }
  const Matrix& inverse() const { return inverse_; }

  bool in_kernel(Eigen::Index k) const { return std::abs(values_(k)) < kernel_tol_; }

  double max_real_part() const { return values_.real().maxCoeff(); }

  /// Slowest decay rate among non-kernel modes (0 when such a mode does not decay).
  double slowest_decay() const {
    double slow = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < values_.size(); ++k) {
      if (in_kernel(k)) continue;
      slow = std::min(slow, -values_(k).real());
    }
    return slow;
  }

  /// Largest |Im lambda|.
  double max_frequency() const { return values_.imag().cwiseAbs().maxCoeff(); }

  /// Coefficients of vec(rho) in the eigenbasis.
  Vector coefficients(const Vector& v) const { return inverse_ * v; }

  Vector kernel_part(const Vector& v) const {
    Vector c = coefficients(v);
    for (Eigen::Index k = 0; k < c.size(); ++k)
      if (!in_kernel(k)) c(k) = 0.0;
    return vectors_ * c;
  }

  Matrix kernel_projector() const {
    Matrix d = Matrix::Zero(values_.size(), values_.size());
    for (Eigen::Index k = 0; k < values_.size(); ++k)
      if (in_kernel(k)) d(k, k) = 1.0;
    return vectors_ * d * inverse_;
  }

 private:
  double kernel_tol_;
  Vector values_;
  Matrix vectors_;
  Matrix inverse_;
};

/// lim_{t->inf} exp(L t) rho0: projection of rho0 onto the generator kernel.
template <typename Derived>
Matrix steady_state(const Superoperator& gen, const Eigen::MatrixBase<Derived>& rho0,
                    double residual_tol = 1e-9) {
  detail::require_same_shape(rho0.rows(), rho0.cols(), gen.dim(), gen.dim(), "steady_state");
  const SpectralDecomposition spec(gen);
  if (spec.max_real_part() > 1e-8) {
    throw NumericalError("steady_state: generator has an eigenvalue with positive real part " +
                         std::to_string(spec.max_real_part()));
  }
  Matrix rho = unvec(spec.kernel_part(vec(rho0)));
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double residual = (gen.matrix() * vec(rho)).norm();
  if (residual > residual_tol) {
    throw NumericalError("steady_state: stationarity residual " + std::to_string(residual));
  }
  return rho;
}

/// Hermiticity, unit trace and (approximate) positivity checks for states.
struct StateDefects {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
};

template <typename Derived>
StateDefects state_defects(const Eigen::MatrixBase<Derived>& rho) {
  StateDefects d;
  d.trace_error = std::abs(rho.trace() - Complex(1.0, 0.0));
  d.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  const Matrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  d.min_eigenvalue = es.eigenvalues().minCoeff();
  return d;
}

template <typename Derived>
bool is_density_matrix(const Eigen::MatrixBase<Derived>& rho, double psd_tol = 1e-8) {
  if (rho.rows() != rho.cols() || !rho.allFinite()) return false;
  const auto d = state_defects(rho);
  return d.trace_error <= 1e-10 && d.hermiticity_error <= 1e-10 && d.min_eigenvalue >= -psd_tol;
}

/// Clips negative eigenvalues and renormalizes. Opt-in only.
template <typename Derived>
Matrix clamp_to_state(const Eigen::MatrixBase<Derived>& rho) {
  const Matrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
  Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
  const double s = w.sum();
  if (s <= 0.0) throw NumericalError("clamp_to_state: state has no positive weight");
  w /= s;
  return es.eigenvectors() * w.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

/// Trace distance 1/2 ||a - b||_1 between Hermitian operators.
template <typename DA, typename DB>
double trace_distance(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  detail::require_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "trace_distance");
  const Matrix diff = a - b;
  const Matrix herm = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// Standard qubit operators, basis order (|1>, |2>) with sigma_z|1> = +|1>.
namespace qubit {
inline Matrix sigma_x() { return (Matrix(2, 2) << 0, 1, 1, 0).finished(); }
inline Matrix sigma_y() {
  return (Matrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished();
}
inline Matrix sigma_z() { return (Matrix(2, 2) << 1, 0, 0, -1).finished(); }
/// |1><2|
inline Matrix lowering() { return (Matrix(2, 2) << 0, 1, 0, 0).finished(); }
/// |level><level|, 0-based.
inline Matrix projector(int level) {
  Matrix p = Matrix::Zero(2, 2);
  p(level, level) = 1.0;
  return p;
}
inline Matrix plus_state() { return Matrix::Constant(2, 2, 0.5); }
}  // namespace qubit

/// Truncated bosonic annihilation operator on Fock levels 0..cutoff-1.
inline Matrix annihilation(Eigen::Index cutoff) {
  Matrix a = Matrix::Zero(cutoff, cutoff);
  for (Eigen::Index n = 1; n < cutoff; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// Truncated coherent-state projector |beta><beta|, renormalized on the cutoff.
inline Matrix coherent_state(Complex beta, Eigen::Index cutoff) {
  Vector psi(cutoff);
  Complex amp = std::exp(-0.5 * std::norm(beta));
  for (Eigen::Index n = 0; n < cutoff; ++n) {
    psi(n) = amp;
    amp *= beta / std::sqrt(static_cast<double>(n + 1));
  }
  psi.normalize();
  return psi * psi.adjoint();
}

}  // namespace spinsme
