#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spinsme/spectroscopy.hpp"
#include "test_util.hpp"

using namespace spinsme;

namespace {

SystemModel figure_model(double g = 2.0) {
  SystemModel m = two_level_model(0.0, 50.0, 2.0, 30.0);
  m.kappa = 10.0;
  m.xi_p = 10.0;
  m.eta = 1.0;
  m.phi = -std::numbers::pi / 2;
  m.alpha_override = Complex(1.0, 0.0);
  m.field = field_strength(m, DiscreteBath{{g}, {0.5}, {}});
  return m;
}

std::vector<RegressionSector> figure_sectors(const SystemModel& m, double g = 2.0) {
  const ReducedModel red(m, build_frame(m), true);
  return regression_sectors(red, enumerate_sectors(DiscreteBath{{g}, {0.5}, {}}),
                            qubit::plus_state());
}

// Random Lindbladian on n levels with two decay channels.
RegressionSector random_sector(int n, std::mt19937_64& rng) {
  const Matrix h = testutil::random_hermitian(n, rng);
  std::vector<Jump> jumps{{0.7, testutil::random_matrix(n, rng)},
                          {0.4, testutil::random_matrix(n, rng)}};
  Superoperator gen = liouvillian(h, jumps);
  Matrix rho = steady_state(gen, testutil::random_density(n, rng));
  return {std::move(gen), std::move(rho), 1.0};
}

}  // namespace

TEST(Measurement, FigureOperator) {
  const auto m = figure_model();
  const auto ops = build_measurement_operator(m, build_frame(m));
  // m = -(1 + Lambda)/10 + i Lambda^2 with Lambda = diag(-0.0046875, 0.0046875).
  EXPECT_NEAR(ops.c(0, 0).real(), -0.09953125, 1e-15);
  EXPECT_NEAR(ops.c(0, 0).imag(), 2.197265625e-5, 1e-15);
  EXPECT_NEAR(ops.c(1, 1).real(), -0.10046875, 1e-15);
  EXPECT_NEAR(ops.c(1, 1).imag(), 2.197265625e-5, 1e-15);
  EXPECT_EQ(ops.c(0, 1), Complex(0.0, 0.0));
}

TEST(Measurement, PhaseFlipNegatesReadout) {
  auto m = figure_model();
  const auto a = build_measurement_operator(m, build_frame(m));
  m.phi += std::numbers::pi;
  const auto b = build_measurement_operator(m, build_frame(m));
  EXPECT_LT((a.c + b.c).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((a.x + b.x).cwiseAbs().maxCoeff(), 1e-15);

  const auto sectors = figure_sectors(m);
  const std::vector<double> tau{0.0, 0.5, 1.0};
  const auto ra = correlation(sectors, a.c, tau, 20.0);
  const auto rb = correlation(sectors, b.c, tau, 20.0);
  for (std::size_t k = 0; k < tau.size(); ++k) EXPECT_NEAR(ra.r_tilde[k], rb.r_tilde[k], 1e-12);
}

TEST(Correlation, ZeroReadoutIsZero) {
  const auto sectors = figure_sectors(figure_model());
  const auto r = correlation(sectors, Matrix::Zero(2, 2), {0.0, 1.0, 2.0}, 20.0);
  for (double v : r.r_tilde) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.static_weight, 0.0);
}

TEST(Correlation, RejectsNonStationaryState) {
  auto sectors = figure_sectors(figure_model());
  sectors[0].steady_state = qubit::plus_state();
  EXPECT_THROW(correlation(sectors, qubit::sigma_z(), {0.0}, 1.0), ValidationError);
}

TEST(Correlation, SectorCovarianceIsStatic) {
  const auto m = figure_model();
  const auto sectors = figure_sectors(m);
  const Matrix x = build_measurement_operator(m, build_frame(m)).x;
  double mean = 0.0, second = 0.0;
  for (const auto& s : sectors) {
    const double v = (x * s.steady_state).trace().real();
    mean += s.weight * v;
    second += s.weight * v * v;
  }
  const auto r = correlation(sectors, build_measurement_operator(m, build_frame(m)).c, {0.0}, 20.0);
  EXPECT_TRUE(r.sector_mixed);
  EXPECT_NEAR(r.static_weight, 400.0 * (second - mean * mean), 1e-12);
}

TEST(Spectrum, AnalyticLorentzian) {
  CorrelationResult c;
  c.tau = linspace(0.0, 40.0, 40001);
  for (double t : c.tau) c.r_tilde.push_back(std::exp(-t) * std::cos(5.0 * t));
  c.slope0 = -1.0;
  const auto omega = linspace(0.0, 10.0, 2001);
  const auto s = spectrum(c, omega);
  for (std::size_t i = 0; i < omega.size(); i += 50) {
    const double w = omega[i];
    const double want = 1.0 / (1.0 + (w - 5.0) * (w - 5.0)) + 1.0 / (1.0 + (w + 5.0) * (w + 5.0));
    EXPECT_NEAR(s.s_raw[i], want, 1e-8);
  }
  const auto pk = peak_metrics(s, 1.0, 9.0);
  EXPECT_NEAR(pk.omega_star, 5.0, 5e-3);
  ASSERT_TRUE(pk.fwhm_resolved);
  // The mirror Lorentzian at -5 widens the half-maximum crossing slightly.
  EXPECT_NEAR(pk.fwhm, 2.0, 0.03);
  EXPECT_FALSE(pk.multi_peak);
}

TEST(Spectrum, UndecayedTailThrows) {
  CorrelationResult c;
  c.tau = linspace(0.0, 2.0, 201);
  for (double t : c.tau) c.r_tilde.push_back(std::exp(-t));
  EXPECT_THROW(spectrum(c, {1.0}), NumericalError);
  c.tau[3] += 1e-3;
  EXPECT_THROW(spectrum(c, {1.0}), ValidationError);
}

TEST(Spectrum, RoutesAgreeOnRandomGenerators) {
  std::mt19937_64 rng(101);
  const auto tau = linspace(0.0, 60.0, 12001);
  const auto omega = linspace(0.0, 6.0, 25);
  for (int i = 0; i < 10; ++i) {
    std::vector<RegressionSector> sectors{random_sector(3, rng)};
    const Matrix c = testutil::random_matrix(3, rng);
    const Regression reg(sectors, Matrix(c + c.adjoint()), c, 1.0);
    const auto direct = spectrum(reg.correlation(tau), omega);
    const auto resolvent = spectrum(reg, omega);
    double scale = 0.0, worst = 0.0;
    for (std::size_t k = 0; k < omega.size(); ++k) {
      scale = std::max(scale, std::abs(resolvent.s_raw[k]));
      worst = std::max(worst, std::abs(direct.s_raw[k] - resolvent.s_raw[k]));
    }
    EXPECT_LT(worst, 1e-6 * scale) << "generator " << i;
  }
}

TEST(Spectrum, ShotFloorAndSymmetry) {
  const auto m = figure_model();
  const auto sectors = figure_sectors(m);
  const Regression reg(sectors, build_measurement_operator(m, build_frame(m)).x,
                       build_measurement_operator(m, build_frame(m)).c, 20.0);
  const auto s = spectrum(reg, {-3.0, 3.0, 1e4});
  EXPECT_NEAR(s.s_raw[0], s.s_raw[1], 1e-10);
  EXPECT_NEAR(s.s_raw[2], 2.0 * m.eta * m.kappa, 1e-3);
  EXPECT_EQ(s.delta_weight, 20.0);
}

TEST(Spectrum, DisplayRescale) {
  CorrelationResult c;
  c.tau = linspace(0.0, 40.0, 4001);
  for (double t : c.tau) c.r_tilde.push_back(std::exp(-t));
  c.delta_weight = 3.0;
  const auto s = spectrum(c, {0.0, 1.0}, {0.5, -1.0});
  for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(s.s_display[i], 0.5 * s.s_raw[i] - 1.0);
}

TEST(PeakMetrics, FlatSpectrumHasNoPeak) {
  SpectrumResult s;
  s.omega = linspace(0.0, 1.0, 11);
  s.s_raw.assign(11, 2.0);
  EXPECT_THROW(peak_metrics(s), NumericalError);
  EXPECT_THROW(peak_metrics(s, 0.0, 0.15), ValidationError);
}

TEST(PeakMetrics, SecondaryPeakFlagged) {
  SpectrumResult s;
  s.omega = linspace(0.0, 10.0, 1001);
  for (double w : s.omega) {
    s.s_raw.push_back(1.0 / (1.0 + (w - 3.0) * (w - 3.0)) +
                      0.8 / (1.0 + 4.0 * (w - 7.0) * (w - 7.0)));
  }
  const auto pk = peak_metrics(s, 0.5, 9.5);
  EXPECT_NEAR(pk.omega_star, 3.0, 0.02);
  EXPECT_TRUE(pk.multi_peak);
}

TEST(CrossCorrelation, UncorrelatedAndLockedBaths) {
  const auto m = figure_model();
  const ReducedModel red(m, build_frame(m), true);
  const auto sectors = enumerate_sectors(DiscreteBath{{2.0}, {0.5}, {}});
  const auto tau = linspace(0.0, 5.0, 11);
  const auto rho0 = qubit::plus_state();

  const auto r0 = cross_correlation(red, red, correlated_pairs(sectors, 0.0), rho0, rho0, tau);
  double sup = std::abs(r0.rc.static_weight);
  for (double v : r0.rc.r_tilde) sup = std::max(sup, std::abs(v));
  EXPECT_LT(sup, 1e-10);
  EXPECT_LT(r0.additivity_error, 1e-10);

  const auto r1 = cross_correlation(red, red, correlated_pairs(sectors, 1.0), rho0, rho0, tau);
  // Sector covariance of <x> is tiny at this point (Lambda ~ 5e-3) but well resolved.
  EXPECT_GT(std::abs(r1.rc.r_tilde[0] + r1.rc.static_weight), 1e-8);
  EXPECT_LT(r1.additivity_error, 1e-10);
  // Locked sectors: the cross term equals the single-system sector covariance.
  EXPECT_NEAR(r1.rc.static_weight, 2.0 * r1.r1.static_weight, 1e-10);
}

TEST(Periodogram, WhiteNoiseLevel) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  const double dt = 0.01, noise = 20.0;
  std::vector<TrajectoryRecord> records(40);
  for (auto& rec : records) {
    rec.bin_width = dt;
    for (int k = 0; k < 4000; ++k) {
      rec.current_times.push_back((k + 0.5) * dt);
      rec.current.push_back(std::sqrt(noise / dt) * normal(rng));
    }
  }
  const auto omega = linspace(1.0, 30.0, 30);
  const auto s = periodogram_spectrum(records, omega, {0.0, 4});
  double mean = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    mean += s.s_raw[i] / omega.size();
    EXPECT_NEAR(s.s_raw[i], noise, 6.0 * s.s_stderr[i]);
  }
  EXPECT_NEAR(mean, noise, 0.03 * noise);
  EXPECT_THROW(periodogram_spectrum(records, omega, {0.0, 1}), ValidationError);
  EXPECT_THROW(periodogram_spectrum({}, omega, {}), ValidationError);
}
