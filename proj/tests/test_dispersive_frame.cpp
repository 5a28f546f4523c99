#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "spinsme/dispersive_frame.hpp"
#include "spinsme/spin_bath.hpp"
#include "test_util.hpp"

using namespace spinsme;

namespace {

SystemModel figure_model() {
  SystemModel m = two_level_model(0.0, 50.0, 2.0, 30.0);
  m.kappa = 10.0;
  m.xi_p = 10.0;
  m.eta = 1.0;
  m.phi = -std::numbers::pi / 2;
  m.alpha_override = Complex(1.0, 0.0);
  return m;
}

// Closed forms for H_S = diag(W1, W2), lambda = g sigma_x.
struct TwoLevelOracle {
  double a, b;  // X_12, X_21
  double g;
  TwoLevelOracle(double w1, double w2, double g_, double wc)
      : a(g_ / (wc - (w2 - w1))), b(g_ / (wc + (w2 - w1))), g(g_) {}
  double os1() const { return g * (a - b); }
  double lam1() const { return 0.5 * (b * b - a * a); }
};

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

SystemModel random_model(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SystemModel m;
  Matrix h = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) h(j, j) = 10.0 * j + u(rng);
  m.h_system = h;
  m.coupling = 0.2 * testutil::random_hermitian(n, rng);
  m.bath_op = testutil::random_hermitian(n, rng);
  m.omega_c = 40.0 + u(rng);
  m.kappa = 5.0;
  return m;
}

}  // namespace

TEST(BuildX, ZeroCoupling) {
  SystemModel m = figure_model();
  m.coupling = Matrix::Zero(2, 2);
  EXPECT_EQ(max_abs(build_x(m)), 0.0);
}

TEST(BuildX, FigureValues) {
  const Matrix x = build_x(figure_model());
  EXPECT_NEAR(std::abs(x(0, 1) - Complex(-0.1, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(x(1, 0) - Complex(0.025, 0.0)), 0.0, 1e-15);
  EXPECT_EQ(x(0, 0), Complex(0.0, 0.0));
  EXPECT_EQ(x(1, 1), Complex(0.0, 0.0));
}

TEST(BuildX, DegenerateLevels) {
  SystemModel m = two_level_model(3.0, 3.0, 0.5, 7.0);
  const Matrix x = build_x(m);
  EXPECT_TRUE(x.isApprox(Matrix((0.5 / 7.0) * qubit::sigma_x()), 1e-14));
}

TEST(BuildX, ResonanceNamesPair) {
  SystemModel m = two_level_model(0.0, 30.0, 1.0, 30.0);
  try {
    build_x(m);
    FAIL() << "expected a resonance error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2)"), std::string::npos);
  }
}

TEST(BuildFrame, FigureValuesAgainstClosedForm) {
  const auto f = build_frame(figure_model());
  const TwoLevelOracle o(0.0, 50.0, 2.0, 30.0);
  EXPECT_NEAR(f.o_s(0, 0).real(), o.os1(), 1e-15);
  EXPECT_NEAR(f.o_s(1, 1).real(), -o.os1(), 1e-15);
  EXPECT_NEAR(f.o_s(0, 0).real(), -0.25, 1e-12);
  EXPECT_NEAR(f.lambda_op(0, 0).real(), o.lam1(), 1e-15);
  EXPECT_NEAR(f.lambda_op(0, 0).real(), -0.0046875, 1e-12);
  EXPECT_NEAR(f.lambda_op(1, 1).real(), 0.0046875, 1e-12);
  EXPECT_NEAR(f.epsilon, 0.05, 1e-12);
  EXPECT_NEAR(f.bad_cavity_margin, 9.0, 1e-12);
}

TEST(BuildFrame, ZeroCoupling) {
  SystemModel m = figure_model();
  m.coupling = Matrix::Zero(2, 2);
  m.delta = 0.7;
  const auto f = build_frame(m);
  EXPECT_EQ(max_abs(f.o_s), 0.0);
  EXPECT_EQ(max_abs(f.lambda_op), 0.0);
  EXPECT_EQ(max_abs(f.q), 0.0);
  EXPECT_TRUE(f.s_tilde.isApprox(m.bath_op));
  EXPECT_NEAR(f.epsilon, 0.7 * 2.0 / 10.0, 1e-15);
}

TEST(BuildFrame, IdentityBathOperator) {
  SystemModel m = figure_model();
  m.bath_op = Matrix::Identity(2, 2);
  const auto f = build_frame(m);
  EXPECT_LT(max_abs(f.s_tilde - Matrix::Identity(2, 2)), 1e-15);
  EXPECT_LT(max_abs(f.q), 1e-15);
  EXPECT_LT(max_abs(f.g_minus), 1e-15);
  EXPECT_LT(max_abs(f.g_plus), 1e-15);
}

TEST(Validity, FigurePasses) {
  const auto m = figure_model();
  const auto r = validity_report(build_frame(m), m);
  EXPECT_TRUE(r.ok()) << r.failures();
  EXPECT_NEAR(r.max_ratio, 0.1, 1e-15);
}

TEST(Validity, SmallKappaFailsBadCavity) {
  SystemModel m = figure_model();
  m.kappa = 0.6;
  const auto r = validity_report(build_frame(m), m);
  EXPECT_FALSE(r.bad_cavity_ok);
  EXPECT_NEAR(r.bad_cavity_margin, 0.6 - 1.0, 1e-12);
  EXPECT_NE(r.failures().find("bad-cavity"), std::string::npos);
}

TEST(Validity, ZeroCouplingPasses) {
  SystemModel m = figure_model();
  m.coupling = Matrix::Zero(2, 2);
  const auto r = validity_report(build_frame(m), m);
  EXPECT_TRUE(r.dispersive_ok);
  EXPECT_EQ(r.max_ratio, 0.0);
}

TEST(FieldTuning, FigureValue) {
  const auto m = figure_model();
  const BathSpec bath = DiscreteBath{{2.0}, {0.5}, {0.0}};
  EXPECT_NEAR(field_strength(m, bath), -50.5, 1e-12);
}

TEST(FrameProperties, HermitianOnRandomModels) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto m = random_model(rng, 3);
    const auto r = validity_report(build_frame(m), m);
    ASSERT_TRUE(r.dispersive_ok);
    const auto f = build_frame(m);
    EXPECT_LT(max_abs(f.o_s - f.o_s.adjoint()), 1e-10);
    EXPECT_LT(max_abs(f.lambda_op - f.lambda_op.adjoint()), 1e-10);
    EXPECT_LT(max_abs(f.s_tilde - f.s_tilde.adjoint()), 1e-10);
  }
}

TEST(FrameProperties, CouplingScaling) {
  std::mt19937_64 rng(22);
  const auto m = random_model(rng, 3);
  auto scaled = m;
  const double s = 1.7;
  scaled.coupling *= s;
  const auto f = build_frame(m), g = build_frame(scaled);
  EXPECT_LT(max_abs(g.x - s * f.x), 1e-14);
  EXPECT_LT(max_abs(g.o_s - s * s * f.o_s), 1e-13);
  EXPECT_LT(max_abs(g.lambda_op - s * s * f.lambda_op), 1e-14);
}

TEST(FrameProperties, TwoLevelShiftsAreDiagonal) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 20; ++i) {
    const auto m = two_level_model(0.0, 40.0 + u(rng), u(rng), 15.0 + u(rng));
    const auto f = build_frame(m);
    EXPECT_LT(std::abs(f.o_s(0, 1)) + std::abs(f.o_s(1, 0)), 1e-12);
    EXPECT_LT(std::abs(f.lambda_op(0, 1)) + std::abs(f.lambda_op(1, 0)), 1e-12);
  }
}
