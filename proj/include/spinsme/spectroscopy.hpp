#pragma once

// Detector-current correlations and homodyne spectra by quantum regression.
//
// With m the prefactor-free measurement operator, x = m + m^dag and
// s^2 = 2 eta kappa, the stationary current autocorrelation is
//   R(tau) = s^2 delta(tau) + s^4 (Tr[x e^{L tau}(m rho + rho m^dag)] - <x>^2).
// In a bath-sector mixture the second term splits into a part that decays in
// tau and a constant (the sector covariance of <x>), which is a zero-frequency
// line in the spectrum and is reported separately.

#include <limits>
#include <optional>
#include <vector>

#include "spinsme/sme_engine.hpp"

namespace spinsme {

struct MeasurementOperators {
  Matrix c;  // m, no sqrt(2 eta kappa)
  Matrix x;  // m + m^dag
};

MeasurementOperators build_measurement_operator(const SystemModel& model,
                                                const DispersiveFrame& frame);

/// One bath sector of an unconditional generator with its stationary state.
struct RegressionSector {
  Superoperator generator;
  Matrix steady_state;
  double weight = 1.0;
};

std::vector<RegressionSector> regression_sectors(const ReducedModel& model,
                                                 const std::vector<ThetaSector>& sectors,
                                                 const Matrix& rho0);

struct CorrelationResult {
  std::vector<double> tau;
  std::vector<double> r_tilde;  // decaying structured part
  double static_weight = 0.0;   // non-decaying part (sector covariance)
  double slope0 = std::numeric_limits<double>::quiet_NaN();  // dR~/dtau at 0
  double delta_weight = 0.0;    // 2 eta kappa
  bool sector_mixed = false;
};

/// s^4 (Tr[obs e^{L tau}(c rho + rho c^dag)] - <obs><c + c^dag>) on a sector mixture.
/// Bilinear in (obs, c), so cross terms of composite readouts add exactly.
class Regression {
 public:
  Regression(std::vector<RegressionSector> sectors, const Matrix& observable, const Matrix& input,
             double strength);

  double static_weight() const { return static_weight_; }
  double strength() const { return strength_; }
  /// R~(tau) at each node, propagating the deflated input.
  CorrelationResult correlation(const std::vector<double>& tau) const;
  /// 2 Re int_0^inf e^{i omega tau} R~(tau) dtau by a linear solve.
  double half_transform(double omega) const;

 private:
  struct Prepared {
    Superoperator generator;
    Matrix regularized;  // L + P, invertible
    Vector deflated;     // (1 - P) vec(c rho + rho c^dag)
    double weight;
  };
  std::vector<Prepared> sectors_;
  Vector functional_;
  double strength_;
  double prefactor_;
  double static_weight_ = 0.0;
  bool mixed_ = false;
};

CorrelationResult correlation(const std::vector<RegressionSector>& sectors, const Matrix& c,
                              const std::vector<double>& tau, double strength);

struct DisplayRescale {
  double scale = 1.0;   // A
  double offset = 0.0;  // B
};

struct PeakMetrics {
  double omega_star = 0.0;
  double height = 0.0;  // above the shot floor
  double fwhm = std::numeric_limits<double>::quiet_NaN();
  bool fwhm_resolved = false;
  bool multi_peak = false;
};

struct SpectrumResult {
  std::vector<double> omega;
  std::vector<double> s_raw;
  std::vector<double> s_display;
  std::vector<double> s_stderr;  // periodogram estimates only
  double delta_weight = 0.0;
  double zero_frequency_line = 0.0;  // 2 pi * static weight
  DisplayRescale rescale;
  std::optional<PeakMetrics> peak;
};

/// Trapezoidal half-transform of sampled R~ (uniform grid from 0) with an
/// Euler-Maclaurin end correction. Throws if the tail has not decayed.
SpectrumResult spectrum(const CorrelationResult& corr, const std::vector<double>& omega,
                        const DisplayRescale& rescale = {});

/// Resolvent evaluation of the same spectrum.
SpectrumResult spectrum(const Regression& regression, const std::vector<double>& omega,
                        const DisplayRescale& rescale = {});

/// Global maximum of S_raw - floor inside [lo, hi]; parabolic refinement and
/// FWHM by linear interpolation. Throws if the maximum sits on the window edge.
PeakMetrics peak_metrics(const SpectrumResult& s,
                         double lo = -std::numeric_limits<double>::infinity(),
                         double hi = std::numeric_limits<double>::infinity());

/// Two subsystems read out through one cavity: x = x1 + x2, c = c1 + c2.
struct CrossCorrelationResult {
  CorrelationResult r1, r2, rc, total;
  double additivity_error = 0.0;  // max |total - r1 - r2 - rc| incl. static parts
};

/// Joint generator for a pair of sectors: L1(theta1) (x) id + id (x) L2(theta2).
Superoperator composite_generator(const ReducedModel& first, const ReducedModel& second,
                                  double theta1, double theta2);

CrossCorrelationResult cross_correlation(const ReducedModel& first, const ReducedModel& second,
                                         const std::vector<ThetaPair>& pairs,
                                         const Matrix& rho0_first, const Matrix& rho0_second,
                                         const std::vector<double>& tau);

/// Composite regression on x1 + x2 (for spectra of the summed readout).
Regression composite_regression(const ReducedModel& first, const ReducedModel& second,
                                const std::vector<ThetaPair>& pairs, const Matrix& rho0_first,
                                const Matrix& rho0_second);

struct WelchOptions {
  double t_burn = 0.0;
  int segments = 4;  // non-overlapping segments per record
};

/// Welch-averaged periodogram of binned currents, two-sided normalization so
/// white noise of intensity D gives D. Each segment is mean-subtracted.
SpectrumResult periodogram_spectrum(const std::vector<TrajectoryRecord>& records,
                                    const std::vector<double>& omega, const WelchOptions& opts,
                                    const DisplayRescale& rescale = {});

std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace spinsme
