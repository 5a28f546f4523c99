#pragma once

// Commuting spin environments. Because H_E and the system-bath coupling both
// commute with every sigma_Z^k, the bath acts as a classical label theta (the
// eigenvalue of sum_k g_k sigma_Z^k) distributed according to the initial
// environment state. Convention: sigma_Z|1> = +|1>, sigma_Z|2> = -|2>.

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "spinsme/dispersive_frame.hpp"

namespace spinsme {

/// Product of diagonal spin states; a[k] is the |1> population of spin k.
/// `omega` (spin frequencies) is carried for completeness and never enters the
/// reduced dynamics.
struct DiscreteBath {
  std::vector<double> g;
  std::vector<double> a;
  std::vector<double> omega;
};

/// Static Gaussian ensemble exp(-theta^2 / V).
struct GaussianStaticBath {
  double V = 1.0;
};

/// Gaussian ensemble whose dephasing rate scales as V t^p, p in {1, 3/2, 2}.
struct GaussianScaledBath {
  double V = 1.0;
  double p = 2.0;
};

using BathSpec = std::variant<DiscreteBath, GaussianStaticBath, GaussianScaledBath>;

struct ThetaSector {
  double theta = 0.0;
  double weight = 0.0;
};

/// Joint sector of two subsystems with separate (possibly correlated) baths.
struct ThetaPair {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double weight = 0.0;
};

inline constexpr std::size_t kMaxEnumeratedSpins = 20;
inline constexpr double kSectorMergeTol = 1e-12;

void validate(const BathSpec& spec);

std::vector<ThetaSector> enumerate_sectors(const DiscreteBath& bath);

/// Variance of the theta distribution at reference time t_ref.
double theta_variance(const BathSpec& spec, double t_ref);

/// Gauss-Hermite sectors for a Gaussian ensemble, frozen at t_ref.
std::vector<ThetaSector> quadrature_sectors(const BathSpec& spec, double t_ref, int n_nodes);

/// Sector list for any bath variant (Gaussian variants use quadrature at t_ref).
std::vector<ThetaSector> sectors_for(const BathSpec& spec, double t_ref, int n_nodes);

/// Bath average of the dephasing phase exp(-2 i theta t) (real part). For the
/// Gaussian variants this is exp(-2 sigma^2(t) t^2): exp(-V t^2), exp(-V t) and
/// exp(-V t^{3/2}) for p = 2, 1, 3/2. Discrete baths return the signed
/// characteristic function, e.g. cos(4t) for one spin with g = 2, a = 1/2.
double coherence_kernel(const BathSpec& spec, double t);

/// <sum_k g_k sigma_Z^k> in the initial environment state.
double bath_mean(const BathSpec& spec);

/// Tuning field for a two-level system with lambda = gamma sigma_x.
double field_strength(const SystemModel& model, const BathSpec& spec);

/// One Monte Carlo draw of theta from the product state.
double sample_theta(const DiscreteBath& bath, std::mt19937_64& rng);

/// Joint distribution of (theta1, theta2): identical with probability r,
/// independent otherwise. Both marginals equal `sectors`.
std::vector<ThetaPair> correlated_pairs(const std::vector<ThetaSector>& sectors, double r);

}  // namespace spinsme
