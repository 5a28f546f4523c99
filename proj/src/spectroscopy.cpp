#include "spinsme/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spinsme {

namespace {

constexpr double kStationaryTol = 1e-9;
constexpr double kTailTol = 1e-6;

bool is_uniform_from_zero(const std::vector<double>& tau) {
  if (tau.size() < 2 || tau.front() != 0.0) return false;
  const double h = tau[1];
  if (!(h > 0.0)) return false;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    if (std::abs(tau[k] - k * h) > 1e-9 * h * std::max<double>(1.0, k)) return false;
  }
  return true;
}

Matrix lift_first(const Matrix& a, Eigen::Index other) {
  return kron(a, Matrix::Identity(other, other));
}

Matrix lift_second(const Matrix& a, Eigen::Index other) {
  return kron(Matrix::Identity(other, other), a);
}

SpectrumResult finish(SpectrumResult s, const DisplayRescale& rescale) {
  s.rescale = rescale;
  s.s_display.resize(s.s_raw.size());
  for (std::size_t i = 0; i < s.s_raw.size(); ++i) {
    s.s_display[i] = rescale.scale * s.s_raw[i] + rescale.offset;
  }
  return s;
}

}  // namespace

MeasurementOperators build_measurement_operator(const SystemModel& model,
                                                const DispersiveFrame& frame) {
  const auto n = model.dim();
  const Matrix id = Matrix::Identity(n, n);
  const Complex alpha = model.alpha();
  MeasurementOperators out;
  out.c = (alpha / Complex(model.kappa, model.delta)) *
          (Complex(0.0, 1.0) * (id + frame.lambda_op) +
           model.kappa * frame.lambda_op * frame.lambda_op) *
          std::exp(Complex(0.0, -model.phi));
  out.x = out.c + out.c.adjoint();
  return out;
}

std::vector<RegressionSector> regression_sectors(const ReducedModel& model,
                                                 const std::vector<ThetaSector>& sectors,
                                                 const Matrix& rho0) {
  std::vector<RegressionSector> out;
  out.reserve(sectors.size());
  for (const auto& s : sectors) {
    Superoperator gen = model.generator(s.theta);
    Matrix rho = steady_state(gen, rho0);
    out.push_back({std::move(gen), std::move(rho), s.weight});
  }
  return out;
}

Regression::Regression(std::vector<RegressionSector> sectors, const Matrix& observable,
                       const Matrix& input, double strength)
    : strength_(strength), prefactor_(strength * strength), mixed_(sectors.size() > 1) {
  if (sectors.empty()) throw ValidationError("regression: no sectors");
  detail::require_same_shape(observable.rows(), observable.cols(), input.rows(), input.cols(),
                             "regression");
  functional_ = trace_functional(observable);
  const Matrix input_x = input + input.adjoint();

  double mean_obs = 0.0, mean_in = 0.0, kernel_sum = 0.0;
  for (auto& s : sectors) {
    detail::require_same_shape(s.steady_state.rows(), s.steady_state.cols(), observable.rows(),
                               observable.cols(), "regression");
    const Vector rho_v = vec(s.steady_state);
    const double residual = (s.generator.matrix() * rho_v).norm();
    if (residual > kStationaryTol) {
      throw ValidationError("regression: state is not stationary (residual " +
                            std::to_string(residual) + ")");
    }
    const SpectralDecomposition decomposition(s.generator);
    if (decomposition.max_real_part() > 1e-8) {
      throw NumericalError("regression: unstable generator");
    }
    const Matrix projector = decomposition.kernel_projector();
    const Vector sigma = vec(Matrix(input * s.steady_state + s.steady_state * input.adjoint()));
    const Vector kernel = projector * sigma;

    mean_obs += s.weight * (functional_.transpose() * rho_v)(0).real();
    mean_in += s.weight * (trace_functional(input_x).transpose() * rho_v)(0).real();
    kernel_sum += s.weight * (functional_.transpose() * kernel)(0).real();

    Matrix regularized = s.generator.matrix() + projector;
    sectors_.push_back({std::move(s.generator), std::move(regularized), sigma - kernel, s.weight});
  }
  static_weight_ = prefactor_ * (kernel_sum - mean_obs * mean_in);
}

CorrelationResult Regression::correlation(const std::vector<double>& tau) const {
  CorrelationResult out;
  out.tau = tau;
  out.r_tilde.assign(tau.size(), 0.0);
  out.static_weight = static_weight_;
  out.delta_weight = strength_;
  out.sector_mixed = mixed_;
  double slope = 0.0;
  const bool uniform = is_uniform_from_zero(tau);
  for (const auto& s : sectors_) {
    slope += s.weight * (functional_.transpose() * (s.generator.matrix() * s.deflated))(0).real();
    if (uniform) {
      const Matrix step = propagator(s.generator, tau[1]);
      Vector v = s.deflated;
      for (std::size_t k = 0; k < tau.size(); ++k) {
        if (k > 0) v = step * v;
        out.r_tilde[k] += s.weight * (functional_.transpose() * v)(0).real();
      }
    } else {
      for (std::size_t k = 0; k < tau.size(); ++k) {
        const Vector v = propagator(s.generator, tau[k]) * s.deflated;
        out.r_tilde[k] += s.weight * (functional_.transpose() * v)(0).real();
      }
    }
  }
  for (double& r : out.r_tilde) r *= prefactor_;
  out.slope0 = prefactor_ * slope;
  return out;
}

double Regression::half_transform(double omega) const {
  Complex acc = 0.0;
  for (const auto& s : sectors_) {
    Matrix shifted = s.regularized;
    shifted.diagonal().array() += Complex(0.0, omega);
    const Vector y = shifted.partialPivLu().solve(s.deflated);
    acc -= s.weight * (functional_.transpose() * y)(0);
  }
  return 2.0 * prefactor_ * acc.real();
}

CorrelationResult correlation(const std::vector<RegressionSector>& sectors, const Matrix& c,
                              const std::vector<double>& tau, double strength) {
  return Regression(sectors, Matrix(c + c.adjoint()), c, strength).correlation(tau);
}

SpectrumResult spectrum(const CorrelationResult& corr, const std::vector<double>& omega,
                        const DisplayRescale& rescale) {
  if (!is_uniform_from_zero(corr.tau) || corr.r_tilde.size() != corr.tau.size()) {
    throw ValidationError("spectrum: correlation must be sampled on a uniform grid from 0");
  }
  double peak = 0.0;
  for (double r : corr.r_tilde) peak = std::max(peak, std::abs(r));
  if (std::abs(corr.r_tilde.back()) > kTailTol * peak) {
    throw NumericalError("spectrum: correlation has not decayed at tau = " +
                         std::to_string(corr.tau.back()) + "; use a longer tau grid");
  }
  const double h = corr.tau[1];
  double slope0 = corr.slope0;
  if (!std::isfinite(slope0)) {
    const auto& r = corr.r_tilde;
    slope0 = r.size() > 2 ? (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * h) : (r[1] - r[0]) / h;
  }
  SpectrumResult s;
  s.omega = omega;
  s.delta_weight = corr.delta_weight;
  s.zero_frequency_line = 2.0 * std::numbers::pi * corr.static_weight;
  s.s_raw.resize(omega.size());
  const std::size_t n = corr.tau.size();
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const Complex rot = std::exp(Complex(0.0, omega[i] * h));
    Complex phase = 1.0, acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
      acc += w * corr.r_tilde[k] * phase;
      phase *= rot;
    }
    // Euler-Maclaurin: + h^2/12 f'(0); only R'(0) survives the real part.
    s.s_raw[i] = corr.delta_weight + 2.0 * h * acc.real() + h * h / 6.0 * slope0;
  }
  return finish(std::move(s), rescale);
}

SpectrumResult spectrum(const Regression& regression, const std::vector<double>& omega,
                        const DisplayRescale& rescale) {
  SpectrumResult s;
  s.omega = omega;
  s.delta_weight = regression.strength();
  s.zero_frequency_line = 2.0 * std::numbers::pi * regression.static_weight();
  s.s_raw.resize(omega.size());
  for (std::size_t i = 0; i < omega.size(); ++i) {
    s.s_raw[i] = s.delta_weight + regression.half_transform(omega[i]);
  }
  return finish(std::move(s), rescale);
}

PeakMetrics peak_metrics(const SpectrumResult& s, double lo, double hi) {
  std::vector<double> w, y;
  for (std::size_t i = 0; i < s.omega.size(); ++i) {
    if (s.omega[i] >= lo && s.omega[i] <= hi) {
      w.push_back(s.omega[i]);
      y.push_back(s.s_raw[i] - s.delta_weight);
    }
  }
  if (w.size() < 3) throw ValidationError("peak_metrics: fewer than 3 points in window");
  const auto im = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  if (im == 0 || im + 1 == y.size()) {
    throw NumericalError("peak_metrics: maximum at window boundary (omega = " +
                         std::to_string(w[im]) + "); no interior peak");
  }
  PeakMetrics pm;
  {
    // Vertex of the parabola through the three points around the maximum.
    const double x0 = w[im - 1], x1 = w[im], x2 = w[im + 1];
    const double y0 = y[im - 1], y1 = y[im], y2 = y[im + 1];
    const double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
    const double a = (d12 - d01) / (x2 - x0);
    if (a < 0.0) {
      const double b = d01 - a * (x0 + x1);
      const double c = y0 - a * x0 * x0 - b * x0;
      pm.omega_star = -b / (2.0 * a);
      pm.height = c - b * b / (4.0 * a);
    } else {
      pm.omega_star = x1;
      pm.height = y1;
    }
  }
  const double half = 0.5 * pm.height;
  std::optional<double> left, right;
  for (std::size_t i = im; i-- > 0;) {
    if (y[i] < half) {
      left = w[i] + (half - y[i]) * (w[i + 1] - w[i]) / (y[i + 1] - y[i]);
      break;
    }
  }
  for (std::size_t i = im + 1; i < y.size(); ++i) {
    if (y[i] < half) {
      right = w[i - 1] + (y[i - 1] - half) * (w[i] - w[i - 1]) / (y[i - 1] - y[i]);
      break;
    }
  }
  if (left && right) {
    pm.fwhm = *right - *left;
    pm.fwhm_resolved = true;
  }
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (i != im && y[i] > y[i - 1] && y[i] > y[i + 1] && y[i] > half) {
      pm.multi_peak = true;
      break;
    }
  }
  return pm;
}

Superoperator composite_generator(const ReducedModel& first, const ReducedModel& second,
                                  double theta1, double theta2) {
  const auto n1 = first.model().dim(), n2 = second.model().dim();
  const Matrix h = lift_first(first.hamiltonian(theta1), n2) +
                   lift_second(second.hamiltonian(theta2), n1);
  std::vector<Jump> jumps;
  for (const auto& j : first.jumps()) jumps.push_back({j.rate, lift_first(j.op, n2)});
  for (const auto& j : second.jumps()) jumps.push_back({j.rate, lift_second(j.op, n1)});
  return liouvillian(h, jumps);
}

namespace {

std::vector<RegressionSector> composite_sectors(const ReducedModel& first,
                                                const ReducedModel& second,
                                                const std::vector<ThetaPair>& pairs,
                                                const Matrix& rho0_first,
                                                const Matrix& rho0_second) {
  if (rho0_first.rows() != first.model().dim() || rho0_second.rows() != second.model().dim()) {
    throw DimensionError("cross_correlation: initial states do not match the subsystems");
  }
  if (std::abs(first.measurement_strength() - second.measurement_strength()) > 1e-12) {
    throw ValidationError("cross_correlation: subsystems must share one cavity (eta, kappa)");
  }
  const Matrix rho0 = kron(rho0_first, rho0_second);
  std::vector<RegressionSector> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Superoperator gen = composite_generator(first, second, p.theta1, p.theta2);
    Matrix rho = steady_state(gen, rho0);
    out.push_back({std::move(gen), std::move(rho), p.weight});
  }
  return out;
}

}  // namespace

Regression composite_regression(const ReducedModel& first, const ReducedModel& second,
                                const std::vector<ThetaPair>& pairs, const Matrix& rho0_first,
                                const Matrix& rho0_second) {
  const auto n1 = first.model().dim(), n2 = second.model().dim();
  const Matrix c = lift_first(first.measurement_operator(), n2) +
                   lift_second(second.measurement_operator(), n1);
  return Regression(composite_sectors(first, second, pairs, rho0_first, rho0_second),
                    Matrix(c + c.adjoint()), c, first.measurement_strength());
}

CrossCorrelationResult cross_correlation(const ReducedModel& first, const ReducedModel& second,
                                         const std::vector<ThetaPair>& pairs,
                                         const Matrix& rho0_first, const Matrix& rho0_second,
                                         const std::vector<double>& tau) {
  const auto n1 = first.model().dim(), n2 = second.model().dim();
  const auto sectors = composite_sectors(first, second, pairs, rho0_first, rho0_second);
  const double s2 = first.measurement_strength();
  const Matrix c1 = lift_first(first.measurement_operator(), n2);
  const Matrix c2 = lift_second(second.measurement_operator(), n1);
  const Matrix x1 = c1 + c1.adjoint(), x2 = c2 + c2.adjoint();

  CrossCorrelationResult out;
  out.r1 = Regression(sectors, x1, c1, s2).correlation(tau);
  out.r2 = Regression(sectors, x2, c2, s2).correlation(tau);
  out.total = Regression(sectors, Matrix(x1 + x2), Matrix(c1 + c2), s2).correlation(tau);
  const auto r12 = Regression(sectors, x1, c2, s2).correlation(tau);
  const auto r21 = Regression(sectors, x2, c1, s2).correlation(tau);

  // Independent shot noises: the cross term carries no delta.
  out.rc = r12;
  out.rc.delta_weight = 0.0;
  out.rc.static_weight = r12.static_weight + r21.static_weight;
  out.rc.slope0 = r12.slope0 + r21.slope0;
  for (std::size_t k = 0; k < tau.size(); ++k) out.rc.r_tilde[k] += r21.r_tilde[k];

  double err = std::abs(out.total.static_weight - out.r1.static_weight - out.r2.static_weight -
                        out.rc.static_weight);
  for (std::size_t k = 0; k < tau.size(); ++k) {
    err = std::max(err, std::abs(out.total.r_tilde[k] - out.r1.r_tilde[k] - out.r2.r_tilde[k] -
                                 out.rc.r_tilde[k]));
  }
  out.additivity_error = err;
  return out;
}

SpectrumResult periodogram_spectrum(const std::vector<TrajectoryRecord>& records,
                                    const std::vector<double>& omega, const WelchOptions& opts,
                                    const DisplayRescale& rescale) {
  if (records.empty()) throw ValidationError("periodogram: no records");
  if (opts.segments < 2) throw ValidationError("periodogram: need at least 2 segments");
  std::vector<double> sum(omega.size(), 0.0), sum_sq(omega.size(), 0.0);
  std::size_t count = 0;
  for (const auto& rec : records) {
    const double dt = rec.bin_width;
    std::vector<double> t, x;
    for (std::size_t k = 0; k < rec.current.size(); ++k) {
      if (rec.current_times[k] >= opts.t_burn) {
        t.push_back(rec.current_times[k]);
        x.push_back(rec.current[k]);
      }
    }
    const std::size_t len = x.size() / static_cast<std::size_t>(opts.segments);
    if (len < 2) throw ValidationError("periodogram: record shorter than 2 segments");
    for (int seg = 0; seg < opts.segments; ++seg) {
      const std::size_t begin = seg * len;
      double mean = 0.0;
      for (std::size_t k = 0; k < len; ++k) mean += x[begin + k];
      mean /= static_cast<double>(len);
      for (std::size_t i = 0; i < omega.size(); ++i) {
        const Complex rot = std::exp(Complex(0.0, omega[i] * dt));
        Complex phase = 1.0, acc = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          acc += (x[begin + k] - mean) * phase;
          phase *= rot;
        }
        const double p = dt / static_cast<double>(len) * std::norm(acc);
        sum[i] += p;
        sum_sq[i] += p * p;
      }
      ++count;
    }
  }
  SpectrumResult s;
  s.omega = omega;
  s.s_raw.resize(omega.size());
  s.s_stderr.resize(omega.size());
  const double n = static_cast<double>(count);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double mean = sum[i] / n;
    const double var = std::max(0.0, sum_sq[i] / n - mean * mean);
    s.s_raw[i] = mean;
    s.s_stderr[i] = std::sqrt(var / n);
  }
  return finish(std::move(s), rescale);
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n < 2) throw ValidationError("linspace: need at least 2 points");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
  return out;
}

}  // namespace spinsme
