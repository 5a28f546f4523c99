#include "spinsme/experiments.hpp"

#include <cmath>
#include <random>

#include "spinsme/emit.hpp"
#include "spinsme/parallel.hpp"

namespace spinsme {

using nlohmann::json;

namespace {

constexpr std::uint64_t kThetaStream = 0xffffffffULL;

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json peak_json(const std::optional<PeakMetrics>& pk) {
  if (!pk) return nullptr;
  return {{"omega_star", pk->omega_star},
          {"height", pk->height},
          {"fwhm", finite_or_null(pk->fwhm)},
          {"fwhm_resolved", pk->fwhm_resolved},
          {"multi_peak", pk->multi_peak}};
}

json derived_json(const ExperimentConfig& c, const PreparedModel& p) {
  json ratios = json::array();
  for (const auto& r : p.report.ratios) ratios.push_back({{"j", r.j + 1}, {"k", r.k + 1}, {"ratio", r.ratio}});
  return {
      {"epsilon", p.frame.epsilon},
      {"bad_cavity_margin", p.frame.bad_cavity_margin},
      {"dispersive_ratios", ratios},
      {"validity_ok", p.report.ok()},
      {"field", p.model.field},
      {"field_mode", c.system.field ? "explicit" : "auto"},
      {"alpha_used", complex_json(p.model.alpha())},
      {"omega_p", p.model.omega_p},
      {"measurement_strength", p.reduced.measurement_strength()},
      {"sectors", p.sectors.size()},
      {"t_ref", c.bath.t_ref},
      {"conventions",
       {{"vectorization", "column-stacking"},
        {"sigma_Z", "|1> -> +1, |2> -> -1"},
        {"measurement_operator", "prefactor-free c"},
        {"correlation_prefactor", "(2 eta kappa)^2"},
        {"correlation_prefactor_alternative", "2 eta kappa"},
        {"shot_floor", "2 eta kappa"},
        {"shot_noise_dephasing_rate", "2 kappa |alpha|^2 / (kappa^2 + Delta^2)"},
        {"full_model_leak_rate", "2 kappa"},
        {"spectrum_kernel", "exp(i omega tau)"},
        {"coherence_constant_c", 1.0},
        {"alpha_corrections", c.sim.include_alpha_corrections}}}};
}

json base_manifest(const std::string& command, const ExperimentConfig& c) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "manifest"},
          {"command", command},
          {"artifact_version", kArtifactVersion},
          {"config", to_json(c)}};
}

bool wants(const ExperimentConfig& c, const char* format) {
  for (const auto& f : c.output.formats)
    if (f == format) return true;
  return false;
}

RunOutcome emit_all(json manifest, const std::vector<std::pair<std::string, CsvTable>>& tables,
                    const ExperimentConfig& c, const RunOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw OutputError("cannot create " + opts.out_dir.string() + ": " + ec.message());
  RunOutcome out;
  json names = json::array();
  for (const auto& t : tables) names.push_back(t.first);
  manifest["outputs"] = names;
  const std::string hash = manifest_hash(manifest);
  manifest["manifest_hash"] = hash;
  manifest["wall_clock"] = wall_clock();
  if (wants(c, "csv")) {
    for (const auto& [name, table] : tables) {
      const auto path = opts.out_dir / name;
      write_csv(path, hash, table);
      out.files.push_back(path);
    }
  }
  const auto manifest_path = opts.out_dir / "manifest.json";
  write_json(manifest_path, manifest);
  out.files.push_back(manifest_path);
  out.manifest = std::move(manifest);
  return out;
}

CsvTable spectrum_table(const SpectrumResult& s) {
  CsvTable t{{"omega", "S_raw", "S_display"}, {}};
  for (std::size_t i = 0; i < s.omega.size(); ++i) {
    t.rows.push_back({s.omega[i], s.s_raw[i], s.s_display[i]});
  }
  return t;
}

std::vector<std::string> entry_columns(const AnalysisConfig& a, const std::string& prefix) {
  std::vector<std::string> cols;
  for (const auto& [j, k] : a.state_entries) {
    const std::string name = prefix + std::to_string(j) + std::to_string(k);
    cols.push_back(name + "_re");
    cols.push_back(name + "_im");
  }
  return cols;
}

void append_entries(std::vector<double>& row, const Matrix& rho, const AnalysisConfig& a) {
  for (const auto& [j, k] : a.state_entries) {
    row.push_back(rho(j, k).real());
    row.push_back(rho(j, k).imag());
  }
}

std::vector<Matrix> mix_sectors(const ReducedModel& model, const std::vector<ThetaSector>& sectors,
                                const Matrix& rho0, double T, double dt_out) {
  const auto times = uniform_times(T, dt_out);
  std::vector<Matrix> out(times.size(), Matrix::Zero(rho0.rows(), rho0.cols()));
  for (const auto& s : sectors) {
    const Matrix step = propagator(model.generator(s.theta), dt_out);
    Vector v = vec(rho0);
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (k > 0) v = step * v;
      out[k] += s.weight * unvec(v);
    }
  }
  return out;
}

double draw_theta(const BathConfig& b, std::uint64_t seed) {
  std::mt19937_64 rng(child_seed(seed, kThetaStream, 0));
  if (const auto* d = std::get_if<DiscreteBath>(&b.spec)) return sample_theta(*d, rng);
  std::normal_distribution<double> normal(0.0, std::sqrt(theta_variance(b.spec, b.t_ref)));
  return normal(rng);
}

RunOutcome run_spectrum(const ExperimentConfig& c, const RunOptions& opts) {
  const auto p = prepare(c, opts.force);
  const auto s = compute_spectrum(c, p);
  json m = base_manifest("spectrum", c);
  m["derived"] = derived_json(c, p);
  m["results"] = {{"peak", peak_json(s.peak)},
                  {"delta_weight", s.delta_weight},
                  {"zero_frequency_line", s.zero_frequency_line},
                  {"method", c.analysis.method}};
  return emit_all(std::move(m), {{"spectrum.csv", spectrum_table(s)}}, c, opts);
}

RunOutcome run_sweep(const ExperimentConfig& c, const RunOptions& opts) {
  const auto& values = c.analysis.sweep_values;
  if (values.empty()) throw ValidationError("analysis.sweep_values: empty sweep");
  std::vector<SpectrumResult> spectra(values.size());
  std::vector<json> derived(values.size());
  parallel_for(values.size(), opts.threads, [&](std::size_t i) {
    const auto point = with_axis_value(c, values[i]);
    const auto p = prepare(point, opts.force);
    spectra[i] = compute_spectrum(point, p);
    derived[i] = derived_json(point, p);
  });

  std::vector<std::pair<std::string, CsvTable>> tables;
  CsvTable summary{{"value", "omega_star", "height", "fwhm", "multi_peak"}, {}};
  json points = json::array();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < values.size(); ++i) {
    tables.emplace_back("spectrum_" + std::to_string(i) + ".csv", spectrum_table(spectra[i]));
    const auto& pk = spectra[i].peak;
    summary.rows.push_back({values[i], pk ? pk->omega_star : nan, pk ? pk->height : nan,
                            pk ? pk->fwhm : nan, pk ? double(pk->multi_peak) : nan});
    points.push_back({{"value", values[i]}, {"peak", peak_json(pk)}, {"derived", derived[i]}});
  }
  tables.emplace_back("summary.csv", std::move(summary));

  json m = base_manifest("sweep", c);
  m["results"] = {{"axis", c.analysis.sweep_axis}, {"points", points}};
  return emit_all(std::move(m), tables, c, opts);
}

RunOutcome run_trajectory(const ExperimentConfig& c, const RunOptions& opts) {
  const auto p = prepare(c, opts.force);
  SimParams sim = c.sim;
  sim.store_stride = sim.bin_steps;  // one state per current sample
  const double theta = draw_theta(c.bath, sim.seed);
  const auto rec = simulate_trajectory(p.reduced, theta, p.rho0, sim, sim.seed);

  CsvTable t{{"t", "I"}, {}};
  for (auto& col : entry_columns(c.analysis, "rho_")) t.columns.push_back(col);
  for (std::size_t i = 0; i < rec.current.size() && i + 1 < rec.states.size(); ++i) {
    std::vector<double> row{rec.times[i + 1], rec.current[i]};
    append_entries(row, rec.states[i + 1], c.analysis);
    t.rows.push_back(std::move(row));
  }
  json m = base_manifest("trajectory", c);
  m["derived"] = derived_json(c, p);
  m["results"] = {{"theta", theta}, {"seed", rec.seed}, {"bin_width", rec.bin_width},
                  {"samples", t.rows.size()}};
  return emit_all(std::move(m), {{"trajectory.csv", std::move(t)}}, c, opts);
}

RunOutcome run_ensemble_cmd(const ExperimentConfig& c, const RunOptions& opts) {
  const auto p = prepare(c, opts.force);
  const auto ens = run_ensemble(p.reduced, p.sectors, p.rho0, c.sim, opts.threads);
  const auto exact = mix_sectors(p.reduced, p.sectors, p.rho0, c.sim.T,
                                 c.sim.dt * c.sim.store_stride);
  CsvTable t{{"t"}, {}};
  for (auto& col : entry_columns(c.analysis, "mean_")) t.columns.push_back(col);
  for (auto& col : entry_columns(c.analysis, "exact_")) t.columns.push_back(col);
  double sup = 0.0;
  const std::size_t n = std::min(ens.times.size(), exact.size());
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> row{ens.times[k]};
    append_entries(row, ens.mean[k], c.analysis);
    append_entries(row, exact[k], c.analysis);
    t.rows.push_back(std::move(row));
    sup = std::max(sup, (ens.mean[k] - exact[k]).cwiseAbs().maxCoeff());
  }
  json m = base_manifest("ensemble", c);
  m["derived"] = derived_json(c, p);
  m["results"] = {{"sup_error", sup},
                  {"bound", 5.0 / std::sqrt(static_cast<double>(c.sim.trajectories))},
                  {"trajectories_per_sector", ens.trajectories_per_sector}};
  return emit_all(std::move(m), {{"ensemble.csv", std::move(t)}}, c, opts);
}

RunOutcome run_correlated(const ExperimentConfig& c, const RunOptions& opts) {
  const auto p = prepare(c, opts.force);
  const auto pairs = correlated_pairs(p.sectors, c.bath.r);
  const auto tau = tau_grid(c.analysis);
  const auto cc = cross_correlation(p.reduced, p.reduced, pairs, p.rho0, p.rho0, tau);
  const auto reg = composite_regression(p.reduced, p.reduced, pairs, p.rho0, p.rho0);
  auto s = spectrum(reg, omega_grid(c.analysis), c.analysis.rescale);
  try {
    s.peak = peak_metrics(s, c.analysis.peak_lo, c.analysis.peak_hi);
  } catch (const NumericalError&) {
    s.peak.reset();
  }

  CsvTable t{{"tau", "R1", "R2", "Rc", "R_total"}, {}};
  for (std::size_t k = 0; k < tau.size(); ++k) {
    t.rows.push_back({tau[k], cc.r1.r_tilde[k], cc.r2.r_tilde[k], cc.rc.r_tilde[k],
                      cc.total.r_tilde[k]});
  }
  json m = base_manifest("correlated", c);
  m["derived"] = derived_json(c, p);
  m["results"] = {{"r", c.bath.r},
                  {"additivity_error", cc.additivity_error},
                  {"rc_static", cc.rc.static_weight},
                  {"rc_at_zero", cc.rc.static_weight + cc.rc.r_tilde.front()},
                  {"rc_decaying_sup",
                   [&] {
                     double v = 0.0;
                     for (double r : cc.rc.r_tilde) v = std::max(v, std::abs(r));
                     return v;
                   }()},
                  {"total_static", cc.total.static_weight},
                  {"zero_frequency_line", s.zero_frequency_line},
                  {"peak", peak_json(s.peak)}};
  return emit_all(std::move(m),
                  {{"correlation.csv", std::move(t)}, {"spectrum.csv", spectrum_table(s)}}, c,
                  opts);
}

RunOutcome run_validate(const ExperimentConfig& c, const RunOptions& opts) {
  const auto check = check_elimination(c, opts.force);
  CsvTable t{{"t", "trace_distance"}, {}};
  for (std::size_t k = 0; k < check.times.size(); ++k) {
    t.rows.push_back({check.times[k], check.trace_distance[k]});
  }
  json m = base_manifest("validate", c);
  m["results"] = {{"max_trace_distance", check.max_distance},
                  {"epsilon", check.epsilon},
                  {"alpha_used", complex_json(check.alpha)},
                  {"max_truncation_leakage", check.max_leakage},
                  {"truncation_warning", check.truncation_warning}};
  return emit_all(std::move(m), {{"validate.csv", std::move(t)}}, c, opts);
}

}  // namespace

PreparedModel prepare(const ExperimentConfig& c, bool force) {
  SystemModel model = make_system(c);
  DispersiveFrame frame = build_frame(model);
  ValidityReport report = validity_report(frame, model, c.system.epsilon_threshold);
  if (!report.ok() && !force) {
    throw ValidationError("validity check failed: " + report.failures() +
                          " (use --force to run anyway)");
  }
  ReducedModel reduced(model, frame, c.sim.include_alpha_corrections);
  auto sectors = sectors_for(c.bath.spec, c.bath.t_ref, c.bath.nodes);
  return {std::move(model), std::move(frame), std::move(report), std::move(reduced),
          std::move(sectors), initial_state(c)};
}

std::vector<double> tau_grid(const AnalysisConfig& a) {
  return linspace(0.0, a.tau_max, static_cast<std::size_t>(a.tau_points));
}

std::vector<double> omega_grid(const AnalysisConfig& a) {
  return linspace(a.omega_min, a.omega_max, static_cast<std::size_t>(a.omega_points));
}

SpectrumResult compute_spectrum(const ExperimentConfig& c, const PreparedModel& p) {
  const Regression reg(regression_sectors(p.reduced, p.sectors, p.rho0), build_measurement_operator(p.model, p.frame).x,
                       p.reduced.measurement_operator(), p.reduced.measurement_strength());
  SpectrumResult s = c.analysis.method == "trapezoid"
                         ? spectrum(reg.correlation(tau_grid(c.analysis)), omega_grid(c.analysis),
                                    c.analysis.rescale)
                         : spectrum(reg, omega_grid(c.analysis), c.analysis.rescale);
  try {
    s.peak = peak_metrics(s, c.analysis.peak_lo, c.analysis.peak_hi);
  } catch (const NumericalError&) {
    s.peak.reset();
  }
  return s;
}

ExperimentConfig with_axis_value(const ExperimentConfig& c, double value) {
  ExperimentConfig out = c;
  if (c.analysis.sweep_axis == "g") {
    auto* d = std::get_if<DiscreteBath>(&out.bath.spec);
    if (!d) throw ValidationError("sweep: axis g needs a discrete bath");
    for (double& g : d->g) g = value;
  } else {
    if (auto* g = std::get_if<GaussianStaticBath>(&out.bath.spec)) {
      g->V = value;
    } else if (auto* h = std::get_if<GaussianScaledBath>(&out.bath.spec)) {
      h->V = value;
    } else {
      throw ValidationError("sweep: axis V needs a Gaussian bath");
    }
  }
  validate(out.bath.spec);
  return out;
}

EliminationCheck check_elimination(const ExperimentConfig& c, bool force) {
  ExperimentConfig vc = c;
  vc.system.alpha.reset();
  const auto p = prepare(vc, force);
  const FullModel full(p.model, p.frame, c.sim.fock_cutoff);
  const double T = c.analysis.validate_T, dt = c.analysis.validate_dt;
  const auto evolved = full_unconditional_evolve(full, p.sectors, p.rho0, T, dt);
  const auto reduced = mix_sectors(p.reduced, p.sectors, p.rho0, T, dt);

  EliminationCheck out;
  out.times = evolved.times;
  out.max_leakage = evolved.max_leakage;
  out.truncation_warning = evolved.truncation_warning;
  out.epsilon = p.frame.epsilon;
  out.alpha = p.model.alpha();
  for (std::size_t k = 0; k < out.times.size(); ++k) {
    const double d = trace_distance(evolved.system_states[k], reduced[k]);
    out.trace_distance.push_back(d);
    out.max_distance = std::max(out.max_distance, d);
  }
  return out;
}

RunOutcome run(const std::string& command, const ExperimentConfig& c, const RunOptions& opts) {
  if (command == "spectrum") return run_spectrum(c, opts);
  if (command == "sweep") return run_sweep(c, opts);
  if (command == "trajectory") return run_trajectory(c, opts);
  if (command == "ensemble") return run_ensemble_cmd(c, opts);
  if (command == "correlated") return run_correlated(c, opts);
  if (command == "validate") return run_validate(c, opts);
  throw ValidationError("unknown command '" + command + "'");
}

}  // namespace spinsme
