#pragma once

// Experiment pipelines behind the command line: each run resolves a config,
// computes its results and writes CSV tables plus a manifest.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinsme/config.hpp"

namespace spinsme {

struct PreparedModel {
  SystemModel model;
  DispersiveFrame frame;
  ValidityReport report;
  ReducedModel reduced;
  std::vector<ThetaSector> sectors;
  Matrix rho0;
};

/// Builds the reduced model for a config. Throws ValidationError when the
/// validity report fails and `force` is false.
PreparedModel prepare(const ExperimentConfig& c, bool force);

std::vector<double> tau_grid(const AnalysisConfig& a);
std::vector<double> omega_grid(const AnalysisConfig& a);

/// Regression spectrum with peak metrics in the configured window (the peak
/// is left empty when no interior maximum exists).
SpectrumResult compute_spectrum(const ExperimentConfig& c, const PreparedModel& p);

/// Config with the sweep axis set to `value` (all spins for g, V for Gaussian baths).
ExperimentConfig with_axis_value(const ExperimentConfig& c, double value);

struct EliminationCheck {
  std::vector<double> times;
  std::vector<double> trace_distance;
  double max_distance = 0.0;
  double max_leakage = 0.0;
  bool truncation_warning = false;
  double epsilon = 0.0;
  Complex alpha;
};

/// Full system + cavity vs. reduced unconditional evolution over
/// [0, validate_T], with alpha = xi_p / (i kappa).
EliminationCheck check_elimination(const ExperimentConfig& c, bool force);

struct RunOptions {
  std::filesystem::path out_dir;
  bool force = false;
  unsigned threads = 0;
};

struct RunOutcome {
  std::vector<std::filesystem::path> files;
  nlohmann::json manifest;
};

inline const std::vector<std::string> kCommands{"spectrum", "trajectory", "ensemble",
                                                "sweep",    "correlated", "validate"};

RunOutcome run(const std::string& command, const ExperimentConfig& c, const RunOptions& opts);

}  // namespace spinsme
