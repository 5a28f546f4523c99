#include "spinsme/spin_bath.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spinsme {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool is_allowed_exponent(double p) {
  return std::abs(p - 1.0) < 1e-12 || std::abs(p - 1.5) < 1e-12 || std::abs(p - 2.0) < 1e-12;
}

// Golub-Welsch for the probabilists' Hermite weight exp(-x^2/2)/sqrt(2 pi).
std::vector<ThetaSector> standard_gauss_hermite(int n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k - 1, k) = jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  std::vector<ThetaSector> out(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i].theta = es.eigenvalues()(i);
    out[i].weight = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    total += out[i].weight;
  }
  for (auto& s : out) s.weight /= total;
  // Symmetrize nodes and weights; the eigensolver leaves ~1e-16 asymmetry.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (out[n - 1 - i].theta - out[i].theta);
    const double w = 0.5 * (out[n - 1 - i].weight + out[i].weight);
    out[i] = {-x, w};
    out[n - 1 - i] = {x, w};
  }
  if (n % 2 == 1) out[n / 2].theta = 0.0;
  return out;
}

}  // namespace

void validate(const BathSpec& spec) {
  std::visit(overloaded{
                 [](const DiscreteBath& b) {
                   if (b.g.size() != b.a.size()) {
                     throw ValidationError("bath: g and a must have the same length");
                   }
                   if (!b.omega.empty() && b.omega.size() != b.g.size()) {
                     throw ValidationError("bath: omega must be empty or match g in length");
                   }
                   for (double a : b.a) {
                     if (!(a >= 0.0 && a <= 1.0)) {
                       throw ValidationError("bath: populations a_k must lie in [0, 1]");
                     }
                   }
                   for (double g : b.g) {
                     if (!std::isfinite(g)) throw ValidationError("bath: non-finite coupling");
                   }
                 },
                 [](const GaussianStaticBath& b) {
                   if (!(b.V > 0.0)) throw ValidationError("bath: V must be positive");
                 },
                 [](const GaussianScaledBath& b) {
                   if (!(b.V > 0.0)) throw ValidationError("bath: V must be positive");
                   if (!is_allowed_exponent(b.p)) {
                     throw ValidationError("bath: exponent p must be 1, 1.5 or 2");
                   }
                 }},
             spec);
}

std::vector<ThetaSector> enumerate_sectors(const DiscreteBath& bath) {
  validate(BathSpec{bath});
  const std::size_t n = bath.g.size();
  if (n > kMaxEnumeratedSpins) {
    throw ValidationError("enumerate_sectors: " + std::to_string(n) +
                          " spins exceed the enumeration limit of " +
                          std::to_string(kMaxEnumeratedSpins) +
                          "; use a Gaussian bath for large environments");
  }
  std::vector<ThetaSector> raw;
  raw.reserve(std::size_t{1} << n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double theta = 0.0, weight = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool down = (mask >> k) & 1u;  // spin k in |2>
      theta += down ? -bath.g[k] : bath.g[k];
      weight *= down ? (1.0 - bath.a[k]) : bath.a[k];
    }
    raw.push_back({theta, weight});
  }
  std::stable_sort(raw.begin(), raw.end(),
                   [](const ThetaSector& l, const ThetaSector& r) { return l.theta > r.theta; });
  std::vector<ThetaSector> merged;
  for (const auto& s : raw) {
    if (!merged.empty() && std::abs(merged.back().theta - s.theta) <= kSectorMergeTol) {
      merged.back().weight += s.weight;
    } else {
      merged.push_back(s);
    }
  }
  std::erase_if(merged, [](const ThetaSector& s) { return s.weight == 0.0; });
  return merged;
}

double theta_variance(const BathSpec& spec, double t_ref) {
  validate(spec);
  return std::visit(
      overloaded{[](const DiscreteBath& b) {
                   double var = 0.0;
                   for (std::size_t k = 0; k < b.g.size(); ++k) {
                     var += 4.0 * b.g[k] * b.g[k] * b.a[k] * (1.0 - b.a[k]);
                   }
                   return var;
                 },
                 [](const GaussianStaticBath& b) { return 0.5 * b.V; },
                 [t_ref](const GaussianScaledBath& b) {
                   if (std::abs(b.p - 2.0) < 1e-12) return 0.5 * b.V;
                   if (!(t_ref > 0.0)) {
                     throw ValidationError("quadrature: t_ref must be positive for time-dependent widths");
                   }
                   if (std::abs(b.p - 1.0) < 1e-12) return 0.5 * b.V / t_ref;
                   return 0.5 * b.V / std::sqrt(t_ref);
                 }},
      spec);
}

std::vector<ThetaSector> quadrature_sectors(const BathSpec& spec, double t_ref, int n_nodes) {
  if (std::holds_alternative<DiscreteBath>(spec)) {
    throw ValidationError("quadrature_sectors: discrete baths are enumerated, not integrated");
  }
  if (n_nodes < 3) throw ValidationError("quadrature_sectors: need at least 3 nodes");
  const double sigma = std::sqrt(theta_variance(spec, t_ref));
  auto nodes = standard_gauss_hermite(n_nodes);
  for (auto& s : nodes) s.theta *= sigma;
  return nodes;
}

std::vector<ThetaSector> sectors_for(const BathSpec& spec, double t_ref, int n_nodes) {
  if (const auto* d = std::get_if<DiscreteBath>(&spec)) return enumerate_sectors(*d);
  return quadrature_sectors(spec, t_ref, n_nodes);
}

double coherence_kernel(const BathSpec& spec, double t) {
  if (t < 0.0) throw ValidationError("coherence_kernel: negative time");
  validate(spec);
  return std::visit(overloaded{[t](const DiscreteBath& b) {
                                 double acc = 0.0;
                                 for (const auto& s : enumerate_sectors(b)) {
                                   acc += s.weight * std::cos(2.0 * s.theta * t);
                                 }
                                 return acc;
                               },
                               [t](const GaussianStaticBath& b) { return std::exp(-b.V * t * t); },
                               [t](const GaussianScaledBath& b) {
                                 return std::exp(-b.V * std::pow(t, b.p));
                               }},
                    spec);
}

double bath_mean(const BathSpec& spec) {
  validate(spec);
  if (const auto* d = std::get_if<DiscreteBath>(&spec)) {
    double mean = 0.0;
    for (std::size_t k = 0; k < d->g.size(); ++k) mean += d->g[k] * (2.0 * d->a[k] - 1.0);
    return mean;
  }
  return 0.0;
}

double field_strength(const SystemModel& model, const BathSpec& spec) {
  if (model.dim() != 2) throw ValidationError("field_strength: requires a two-level system");
  const Matrix& lam = model.coupling;
  const bool sigma_x_like = std::abs(lam(0, 0)) < 1e-14 && std::abs(lam(1, 1)) < 1e-14 &&
                            std::abs(lam(0, 1).imag()) < 1e-14;
  if (!sigma_x_like) throw ValidationError("field_strength: coupling must be gamma sigma_x");
  const double gamma = lam(0, 1).real();
  const double omega_1 = model.h_system(0, 0).real();
  const double omega_2 = model.h_system(1, 1).real();
  const double detuning = omega_2 - omega_1 - model.omega_c;
  const Complex alpha = model.alpha();
  const double a2 = std::norm(alpha);
  const double drive = 2.0 * (model.xi_p * std::conj(alpha)).real();  // xi a* + xi* a
  const double ratio = gamma / detuning;
  // Verbatim: the |alpha|^2 gamma^2 / detuning term appears twice.
  return omega_1 - omega_2 - a2 * gamma * gamma / detuning - bath_mean(spec) -
         0.5 * drive * ratio * ratio - a2 * gamma * gamma / detuning;
}

double sample_theta(const DiscreteBath& bath, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double theta = 0.0;
  for (std::size_t k = 0; k < bath.g.size(); ++k) {
    theta += (u(rng) < bath.a[k]) ? bath.g[k] : -bath.g[k];
  }
  return theta;
}

std::vector<ThetaPair> correlated_pairs(const std::vector<ThetaSector>& sectors, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("correlated_pairs: r must lie in [0, 1]");
  std::vector<ThetaPair> out;
  out.reserve(sectors.size() * sectors.size());
  for (std::size_t i = 0; i < sectors.size(); ++i) {
    for (std::size_t j = 0; j < sectors.size(); ++j) {
      double w = (1.0 - r) * sectors[i].weight * sectors[j].weight;
      if (i == j) w += r * sectors[i].weight;
      if (w > 0.0) out.push_back({sectors[i].theta, sectors[j].theta, w});
    }
  }
  return out;
}

}  // namespace spinsme
