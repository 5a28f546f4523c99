#include <gtest/gtest.h>

#include <random>

#include "spinsme/operator_core.hpp"
#include "test_util.hpp"

using namespace spinsme;
using testutil::random_density;
using testutil::random_hermitian;
using testutil::random_matrix;

namespace {

// Element-wise X rho X^dag - 1/2 {X^dag X, rho}.
Matrix dissipator_oracle(const Matrix& x, const Matrix& rho) {
  const auto n = x.rows();
  Matrix out = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Complex acc = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          acc += x(i, k) * rho(k, l) * std::conj(x(j, l));
          acc -= 0.5 * std::conj(x(k, i)) * x(k, l) * rho(l, j);
          acc -= 0.5 * rho(i, k) * std::conj(x(l, k)) * x(l, j);
        }
      out(i, j) = acc;
    }
  return out;
}

// Classical RK4 with step doubling until successive results agree.
Matrix rk4_oracle(const Matrix& l, const Vector& v0, double t) {
  auto integrate = [&](int steps) {
    const double h = t / steps;
    Vector v = v0;
    for (int s = 0; s < steps; ++s) {
      const Vector k1 = l * v;
      const Vector k2 = l * (v + 0.5 * h * k1);
      const Vector k3 = l * (v + 0.5 * h * k2);
      const Vector k4 = l * (v + h * k3);
      v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return v;
  };
  int steps = 16;
  Vector prev = integrate(steps);
  for (;;) {
    steps *= 2;
    Vector next = integrate(steps);
    if ((next - prev).cwiseAbs().maxCoeff() < 1e-13 || steps > (1 << 16)) return unvec(next);
    prev = next;
  }
}

}  // namespace

TEST(Dissipator, LoweringOnExcited) {
  const Matrix rho = qubit::projector(1);
  const Matrix d = dissipator(qubit::lowering(), rho);
  EXPECT_TRUE(d.isApprox(qubit::projector(0) - qubit::projector(1)));
}

TEST(Dissipator, IdentityIsZero) {
  std::mt19937_64 rng(1);
  const Matrix d = dissipator(Matrix(Matrix::Identity(3, 3)), random_density(3, rng));
  EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Dissipator, MatchesElementwiseOracle) {
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(3, rng);
  const Matrix rho = random_density(3, rng);
  EXPECT_LT((dissipator(x, rho) - dissipator_oracle(x, rho)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Dissipator, DimensionMismatch) {
  EXPECT_THROW(dissipator(Matrix(Matrix::Identity(2, 2)), Matrix(Matrix::Identity(3, 3))),
               DimensionError);
}

TEST(MeasurementSuperop, SigmaZOnMixed) {
  const Matrix out = measurement_superop(qubit::sigma_z(), Matrix(Matrix::Identity(2, 2) / 2.0));
  EXPECT_TRUE(out.isApprox(qubit::sigma_z()));
}

TEST(MeasurementSuperop, IdentityGivesZero) {
  std::mt19937_64 rng(3);
  const Matrix out = measurement_superop(Matrix(Matrix::Identity(2, 2)), random_density(2, rng));
  EXPECT_LT(out.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MeasurementSuperop, FigureOperatorOnPlus) {
  // Prefactor-free readout operator at the figure parameter point.
  Matrix c = Matrix::Zero(2, 2);
  c(0, 0) = Complex(-0.09953125, 2.197265625e-5);
  c(1, 1) = Complex(-0.10046875, 2.197265625e-5);
  const Matrix rho = qubit::plus_state();
  const Complex mean = (c * rho + rho * c.adjoint()).trace();
  const Matrix oracle = c * rho + rho * c.adjoint() - mean * rho;
  EXPECT_LT((measurement_superop(c, rho) - oracle).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MeasurementSuperop, RejectsUnnormalizedState) {
  EXPECT_THROW(measurement_superop(qubit::sigma_z(), Matrix(Matrix::Identity(2, 2))),
               ValidationError);
}

TEST(Superoperators, RandomOutputsAreTraceless) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Matrix l = random_matrix(2, rng);
    const Matrix rho = random_density(2, rng);
    EXPECT_LT(std::abs(dissipator(l, rho).trace()), 1e-12);
    EXPECT_LT(std::abs(measurement_superop(l, rho).trace()), 1e-12);
  }
}

TEST(Liouvillian, ZeroGenerator) {
  const auto gen = liouvillian(Matrix::Zero(2, 2), {});
  EXPECT_EQ(gen.matrix().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Liouvillian, DephasingCoherenceFactor) {
  const double omega = 1.3, gamma = 0.4;
  const auto gen = liouvillian(0.5 * omega * qubit::sigma_z(), {{gamma, qubit::sigma_z()}});
  const Matrix rho = qubit::plus_state();
  const Matrix out = gen.apply(rho);
  // d rho_12/dt for H = omega sigma_z / 2: -i omega rho_12 - 2 gamma rho_12.
  EXPECT_NEAR(std::abs(out(0, 1) - Complex(-2.0 * gamma, -omega) * rho(0, 1)), 0.0, 1e-14);
}

TEST(Liouvillian, MatrixFormMatchesDirect) {
  std::mt19937_64 rng(5);
  const Matrix h = random_hermitian(2, rng);
  const Matrix l1 = random_matrix(2, rng), l2 = random_matrix(2, rng);
  const auto gen = liouvillian(h, {{0.7, l1}, {0.2, l2}});
  for (int i = 0; i < 5; ++i) {
    const Matrix rho = random_density(2, rng);
    const Matrix direct = Complex(0, -1) * commutator(h, rho) + 0.7 * dissipator(l1, rho) +
                          0.2 * dissipator(l2, rho);
    EXPECT_LT((gen.apply(rho) - direct).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_LT(gen.trace_defect(), 1e-10);
}

TEST(Liouvillian, Errors) {
  EXPECT_THROW(liouvillian(qubit::lowering(), {}), ValidationError);
  EXPECT_THROW(liouvillian(qubit::sigma_z(), {{-1.0, qubit::sigma_z()}}), ValidationError);
}

TEST(Propagate, ZeroTimeIsExact) {
  std::mt19937_64 rng(6);
  const Matrix rho = random_density(2, rng);
  const auto gen = liouvillian(qubit::sigma_x(), {{1.0, qubit::lowering()}});
  EXPECT_EQ(propagate(gen, rho, 0.0), rho);
}

TEST(Propagate, DephasingDecay) {
  const auto gen = liouvillian(Matrix::Zero(2, 2), {{0.5, qubit::sigma_z()}});
  const Matrix rho = propagate(gen, qubit::plus_state(), 1.0);
  EXPECT_NEAR(rho(0, 1).real(), 0.5 * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(rho(0, 1).real(), 0.18394, 1e-5);
}

TEST(Propagate, MatchesRungeKuttaOracle) {
  std::mt19937_64 rng(7);
  const auto gen = liouvillian(random_hermitian(2, rng), {{0.8, random_matrix(2, rng)}});
  const Matrix rho0 = random_density(2, rng);
  const Matrix oracle = rk4_oracle(gen.matrix(), vec(rho0), 1.7);
  EXPECT_LT((propagate(gen, rho0, 1.7) - oracle).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Propagate, ConservesTraceAndHermiticity) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto gen = liouvillian(random_hermitian(2, rng),
                                 {{0.5, random_matrix(2, rng)}, {0.1, random_matrix(2, rng)}});
    const Matrix rho0 = random_density(2, rng);
    for (double t : {0.3, 2.0, 10.0}) {
      const Matrix rho = propagate(gen, rho0, t);
      EXPECT_LT(std::abs(rho.trace() - 1.0), 1e-9);
      EXPECT_LT((rho - rho.adjoint()).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(SteadyState, PureDephasingKeepsPopulations) {
  const auto gen = liouvillian(Matrix::Zero(2, 2), {{1.0, qubit::sigma_z()}});
  const Matrix rho = steady_state(gen, qubit::plus_state());
  EXPECT_TRUE(rho.isApprox(Matrix(Matrix::Identity(2, 2) / 2.0), 1e-12));
}

TEST(SteadyState, ZeroGeneratorReturnsInput) {
  std::mt19937_64 rng(9);
  const Matrix rho0 = random_density(2, rng);
  EXPECT_TRUE(steady_state(Superoperator::zero(2), rho0).isApprox(rho0, 1e-12));
}

TEST(SteadyState, AmplitudeDampingMatchesLongPropagation) {
  std::mt19937_64 rng(10);
  const auto gen = liouvillian(Matrix::Zero(2, 2), {{1.0, qubit::lowering()}});
  const Matrix rho0 = random_density(2, rng);
  const Matrix ss = steady_state(gen, rho0);
  EXPECT_LT((ss - qubit::projector(0)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((ss - propagate(gen, rho0, 50.0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SteadyState, RandomDampedGenerators) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto gen = liouvillian(random_hermitian(2, rng), {{1.0, random_matrix(2, rng)}});
    const Matrix rho0 = random_density(2, rng);
    const Matrix ss = steady_state(gen, rho0);
    EXPECT_LT((gen.matrix() * vec(ss)).norm(), 1e-9);
    EXPECT_LT((ss - propagate(gen, rho0, 100.0)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(SteadyState, RejectsUnstableGenerator) {
  const Superoperator gen(Matrix(Matrix::Identity(4, 4)));
  EXPECT_THROW(steady_state(gen, qubit::plus_state()), NumericalError);
}

TEST(Algebra, CommutatorOfSelfVanishes) {
  std::mt19937_64 rng(12);
  const Matrix a = random_matrix(3, rng);
  EXPECT_EQ(commutator(a, a).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Algebra, PartialTraceOfProduct) {
  std::mt19937_64 rng(13);
  const Matrix rho = random_density(2, rng);
  const Matrix sigma = random_matrix(3, rng);
  const Matrix out = partial_trace(kron(rho, sigma), {2, 3}, 1);
  EXPECT_LT((out - rho * sigma.trace()).cwiseAbs().maxCoeff(), 1e-14);
  const Matrix first = partial_trace(kron(rho, sigma), {2, 3}, 0);
  EXPECT_LT((first - sigma * rho.trace()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Algebra, KronIndexFormula) {
  std::mt19937_64 rng(14);
  const Matrix a = random_matrix(2, rng), b = random_matrix(3, rng);
  const Matrix k = kron(a, b);
  ASSERT_EQ(k.rows(), 6);
  ASSERT_EQ(k.cols(), 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_EQ(k(i, j), a(i / 3, j / 3) * b(i % 3, j % 3));
}

TEST(Algebra, VecRoundTripIsExact) {
  std::mt19937_64 rng(15);
  const Matrix rho = random_matrix(4, rng);
  EXPECT_EQ(unvec(vec(rho)), rho);
}

TEST(Algebra, TraceFunctionalDoesNotConjugate) {
  std::mt19937_64 rng(16);
  const Matrix a = random_matrix(3, rng), rho = random_matrix(3, rng);
  EXPECT_LT(std::abs((trace_functional(a).transpose() * vec(rho))(0) - (a * rho).trace()), 1e-14);
}

TEST(States, Predicates) {
  EXPECT_TRUE(is_density_matrix(qubit::plus_state()));
  EXPECT_FALSE(is_density_matrix(qubit::sigma_z()));
  Matrix neg = qubit::plus_state();
  neg(0, 0) = 1.1;
  neg(1, 1) = -0.1;
  const Matrix fixed = clamp_to_state(neg);
  EXPECT_TRUE(is_density_matrix(fixed));
  EXPECT_NEAR(trace_distance(qubit::projector(0), qubit::projector(1)), 1.0, 1e-14);
}

TEST(Cavity, CoherentStateIsNormalized) {
  const Matrix rho = coherent_state(Complex(0.3, -0.8), 12);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-14);
  const Matrix a = annihilation(12);
  EXPECT_NEAR(std::abs((a * rho).trace() - Complex(0.3, -0.8)), 0.0, 1e-6);
}
