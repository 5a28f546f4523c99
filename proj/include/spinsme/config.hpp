#pragma once

// Experiment configuration: strict JSON, schema-versioned. Every key has a
// default; unknown keys are errors. A run manifest is accepted as a config and
// yields the same resolved configuration.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spinsme/sme_engine.hpp"
#include "spinsme/spectroscopy.hpp"
#include "spinsme/spin_bath.hpp"

namespace spinsme {

inline constexpr int kSchemaVersion = 1;

struct SystemConfig {
  std::vector<double> levels{0.0, 50.0};
  double gamma = 2.0;
  std::string bath_operator = "sigma_z";  // sigma_z | sigma_x | identity
  double omega_c = 30.0;
  std::optional<double> omega_p;          // default omega_c - delta
  Complex xi_p{10.0, 0.0};
  double kappa = 10.0;
  double eta = 1.0;
  double phi = -1.5707963267948966;
  double delta = 0.0;
  std::optional<Complex> alpha;           // default xi_p / (i kappa)
  std::optional<double> field;            // default: tuning formula
  double dispersive_threshold = 0.2;
  double resonance_floor = 1e-6;
  double epsilon_threshold = 0.15;
  std::string initial_state = "mixed";    // mixed | plus | ground | excited
};

struct BathConfig {
  BathSpec spec = DiscreteBath{{2.0}, {0.5}, {0.0}};
  double t_ref = 1.0;
  int nodes = 24;
  double r = 0.0;
};

struct AnalysisConfig {
  double tau_max = 400.0;
  int tau_points = 40001;
  double omega_min = 0.0;
  double omega_max = 8.0;
  int omega_points = 1601;
  double peak_lo = 0.4;
  double peak_hi = 8.0;
  DisplayRescale rescale{0.5, -1.0};
  std::string method = "resolvent";  // resolvent | trapezoid
  std::string sweep_axis = "g";      // g | V
  std::vector<double> sweep_values{0.5, 1.0, 1.5, 2.0};
  std::vector<std::pair<int, int>> state_entries{{0, 0}, {0, 1}};
  double burn_in = 0.0;
  int segments = 4;
  double validate_T = 5.0;
  double validate_dt = 0.05;
};

struct OutputConfig {
  std::string dir = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  SystemConfig system;
  BathConfig bath;
  SimParams sim;
  AnalysisConfig analysis;
  OutputConfig output;
};

/// Parses a config or a run manifest (its "config" block). Throws
/// ValidationError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved echo; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& c);

/// Bare model with defaults resolved; the field is evaluated from the tuning
/// formula unless given explicitly.
SystemModel make_system(const ExperimentConfig& c);
Matrix initial_state(const ExperimentConfig& c);

}  // namespace spinsme
