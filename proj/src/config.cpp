#include "spinsme/config.hpp"

#include <fstream>
#include <set>

namespace spinsme {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) out = as_number(*v, where(key));
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ValidationError(where(key) + ": expected an integer");
      out = v->get<int>();
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ValidationError(where(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const std::string& key, std::string& out, std::initializer_list<const char*> allowed) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ValidationError(where(key) + ": expected a string");
      out = v->get<std::string>();
      if (allowed.size() == 0) return;
      for (const char* a : allowed)
        if (out == a) return;
      std::string msg = where(key) + ": unknown value '" + out + "' (expected one of";
      for (const char* a : allowed) msg += std::string(" ") + a;
      throw ValidationError(msg + ")");
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) out = as_numbers(*v, where(key));
  }

  void complex(const std::string& key, Complex& out) {
    if (const json* v = find(key)) out = as_complex(*v, where(key));
  }

  void optional_complex(const std::string& key, std::optional<Complex>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        out = as_complex(*v, where(key));
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError(where(it.key()) + ": unknown key");
    }
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ValidationError(where + ": expected a number");
    return v.get<double>();
  }

  static std::vector<double> as_numbers(const json& v, const std::string& where) {
    if (!v.is_array()) throw ValidationError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(as_number(x, where));
    return out;
  }

  static Complex as_complex(const json& v, const std::string& where) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    const auto parts = as_numbers(v, where);
    if (parts.size() != 2) throw ValidationError(where + ": expected [re, im]");
    return {parts[0], parts[1]};
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

void parse_system(const json& j, SystemConfig& s) {
  Reader r(j, "system");
  r.numbers("levels", s.levels);
  r.number("gamma", s.gamma);
  r.text("bath_operator", s.bath_operator, {"sigma_z", "sigma_x", "identity"});
  r.number("omega_c", s.omega_c);
  if (const json* v = r.find("omega_p")) {
    if (v->is_null()) {
      s.omega_p.reset();
    } else {
      s.omega_p = Reader::as_number(*v, "system.omega_p");
    }
  }
  r.complex("xi_p", s.xi_p);
  r.number("kappa", s.kappa);
  r.number("eta", s.eta);
  r.number("phi", s.phi);
  r.number("delta", s.delta);
  r.optional_complex("alpha", s.alpha);
  if (const json* v = r.find("field")) {
    if (v->is_string() && v->get<std::string>() == "auto") {
      s.field.reset();
    } else if (v->is_number()) {
      s.field = v->get<double>();
    } else {
      throw ValidationError("system.field: expected \"auto\" or a number");
    }
  }
  r.number("dispersive_threshold", s.dispersive_threshold);
  r.number("resonance_floor", s.resonance_floor);
  r.number("epsilon_threshold", s.epsilon_threshold);
  r.text("initial_state", s.initial_state, {"mixed", "plus", "ground", "excited"});
  r.finish();
  if (s.levels.size() != 2) throw ValidationError("system.levels: a two-level system is required");
}

void parse_bath(const json& j, BathConfig& b) {
  Reader r(j, "bath");
  std::string type = "discrete";
  r.text("type", type, {"discrete", "gaussian_static", "gaussian_scaled"});
  if (type == "discrete") {
    DiscreteBath d = std::holds_alternative<DiscreteBath>(b.spec) ? std::get<DiscreteBath>(b.spec)
                                                                  : DiscreteBath{};
    r.numbers("g", d.g);
    r.numbers("a", d.a);
    r.numbers("omega", d.omega);
    b.spec = d;
  } else if (type == "gaussian_static") {
    GaussianStaticBath g;
    r.number("V", g.V);
    b.spec = g;
  } else {
    GaussianScaledBath g;
    r.number("V", g.V);
    r.number("p", g.p);
    b.spec = g;
  }
  r.number("t_ref", b.t_ref);
  r.integer("nodes", b.nodes);
  r.number("r", b.r);
  r.finish();
  validate(b.spec);
  if (!(b.r >= 0.0 && b.r <= 1.0)) throw ValidationError("bath.r: must lie in [0, 1]");
  if (b.nodes < 3) throw ValidationError("bath.nodes: need at least 3 quadrature nodes");
}

void parse_sim(const json& j, SimParams& p) {
  Reader r(j, "sim");
  r.number("dt", p.dt);
  r.number("T", p.T);
  r.integer("trajectories", p.trajectories);
  r.integer("fock_cutoff", p.fock_cutoff);
  r.integer("store_stride", p.store_stride);
  r.integer("bin_steps", p.bin_steps);
  if (const json* v = r.find("seed")) {
    if (!v->is_number_unsigned()) throw ValidationError("sim.seed: expected a non-negative integer");
    p.seed = v->get<std::uint64_t>();
  }
  r.flag("clamp_positivity", p.clamp_positivity);
  r.flag("include_alpha_corrections", p.include_alpha_corrections);
  std::string scheme = p.scheme == Scheme::EulerMaruyama ? "euler_maruyama" : "exponential_euler";
  r.text("scheme", scheme, {"euler_maruyama", "exponential_euler"});
  p.scheme = scheme == "euler_maruyama" ? Scheme::EulerMaruyama : Scheme::ExponentialEuler;
  r.finish();
  p.validate();
}

void parse_analysis(const json& j, AnalysisConfig& a) {
  Reader r(j, "analysis");
  r.number("tau_max", a.tau_max);
  r.integer("tau_points", a.tau_points);
  r.number("omega_min", a.omega_min);
  r.number("omega_max", a.omega_max);
  r.integer("omega_points", a.omega_points);
  std::vector<double> window{a.peak_lo, a.peak_hi};
  r.numbers("peak_window", window);
  if (window.size() != 2 || !(window[0] < window[1])) {
    throw ValidationError("analysis.peak_window: expected [lo, hi] with lo < hi");
  }
  a.peak_lo = window[0];
  a.peak_hi = window[1];
  std::vector<double> rescale{a.rescale.scale, a.rescale.offset};
  r.numbers("rescale", rescale);
  if (rescale.size() != 2) throw ValidationError("analysis.rescale: expected [A, B]");
  a.rescale = {rescale[0], rescale[1]};
  r.text("method", a.method, {"resolvent", "trapezoid"});
  r.text("sweep_axis", a.sweep_axis, {"g", "V"});
  r.numbers("sweep_values", a.sweep_values);
  if (const json* v = r.find("state_entries")) {
    if (!v->is_array()) throw ValidationError("analysis.state_entries: expected [[j, k], ...]");
    a.state_entries.clear();
    for (const auto& e : *v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        throw ValidationError("analysis.state_entries: expected [[j, k], ...]");
      }
      a.state_entries.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  r.number("burn_in", a.burn_in);
  r.integer("segments", a.segments);
  r.number("validate_T", a.validate_T);
  r.number("validate_dt", a.validate_dt);
  r.finish();
  if (a.tau_points < 2 || a.omega_points < 2 || !(a.tau_max > 0.0) ||
      !(a.omega_max > a.omega_min)) {
    throw ValidationError("analysis: tau and omega grids need positive extent and >= 2 points");
  }
  for (const auto& [row, col] : a.state_entries) {
    if (row < 0 || row > 1 || col < 0 || col > 1) {
      throw ValidationError("analysis.state_entries: indices must be 0 or 1");
    }
  }
}

void parse_output(const json& j, OutputConfig& o) {
  Reader r(j, "output");
  r.text("dir", o.dir, {});
  if (const json* v = r.find("formats")) {
    if (!v->is_array()) throw ValidationError("output.formats: expected an array of strings");
    o.formats.clear();
    for (const auto& f : *v) {
      if (!f.is_string() || (f != "csv" && f != "json")) {
        throw ValidationError("output.formats: entries must be \"csv\" or \"json\"");
      }
      o.formats.push_back(f.get<std::string>());
    }
  }
  r.finish();
}

}  // namespace

ExperimentConfig parse_config(const json& root) {
  if (!root.is_object()) throw ValidationError("config: expected a JSON object");
  if (root.contains("kind")) {
    if (root["kind"] != "manifest") throw ValidationError("kind: unknown document kind");
    if (!root.contains("config")) throw ValidationError("manifest: missing config block");
    return parse_config(root["config"]);
  }
  ExperimentConfig c;
  Reader r(root, "");
  if (const json* v = r.find("schema_version")) {
    if (!v->is_number_integer() || v->get<int>() != kSchemaVersion) {
      throw ValidationError("schema_version: expected " + std::to_string(kSchemaVersion));
    }
  } else {
    throw ValidationError("schema_version: missing");
  }
  if (const json* v = r.find("system")) parse_system(*v, c.system);
  if (const json* v = r.find("bath")) parse_bath(*v, c.bath);
  if (const json* v = r.find("sim")) parse_sim(*v, c.sim);
  if (const json* v = r.find("analysis")) parse_analysis(*v, c.analysis);
  if (const json* v = r.find("output")) parse_output(*v, c.output);
  r.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  const auto& s = c.system;
  json system = {{"levels", s.levels},
                 {"gamma", s.gamma},
                 {"bath_operator", s.bath_operator},
                 {"omega_c", s.omega_c},
                 {"omega_p", s.omega_p ? json(*s.omega_p) : json(nullptr)},
                 {"xi_p", complex_json(s.xi_p)},
                 {"kappa", s.kappa},
                 {"eta", s.eta},
                 {"phi", s.phi},
                 {"delta", s.delta},
                 {"alpha", s.alpha ? complex_json(*s.alpha) : json(nullptr)},
                 {"field", s.field ? json(*s.field) : json("auto")},
                 {"dispersive_threshold", s.dispersive_threshold},
                 {"resonance_floor", s.resonance_floor},
                 {"epsilon_threshold", s.epsilon_threshold},
                 {"initial_state", s.initial_state}};

  json bath;
  if (const auto* d = std::get_if<DiscreteBath>(&c.bath.spec)) {
    bath = {{"type", "discrete"}, {"g", d->g}, {"a", d->a}, {"omega", d->omega}};
  } else if (const auto* g = std::get_if<GaussianStaticBath>(&c.bath.spec)) {
    bath = {{"type", "gaussian_static"}, {"V", g->V}};
  } else {
    const auto& h = std::get<GaussianScaledBath>(c.bath.spec);
    bath = {{"type", "gaussian_scaled"}, {"V", h.V}, {"p", h.p}};
  }
  bath["t_ref"] = c.bath.t_ref;
  bath["nodes"] = c.bath.nodes;
  bath["r"] = c.bath.r;

  const auto& p = c.sim;
  json sim = {{"dt", p.dt},
              {"T", p.T},
              {"trajectories", p.trajectories},
              {"fock_cutoff", p.fock_cutoff},
              {"store_stride", p.store_stride},
              {"bin_steps", p.bin_steps},
              {"seed", p.seed},
              {"clamp_positivity", p.clamp_positivity},
              {"include_alpha_corrections", p.include_alpha_corrections},
              {"scheme", p.scheme == Scheme::EulerMaruyama ? "euler_maruyama" : "exponential_euler"}};

  const auto& a = c.analysis;
  json entries = json::array();
  for (const auto& [row, col] : a.state_entries) entries.push_back({row, col});
  json analysis = {{"tau_max", a.tau_max},
                   {"tau_points", a.tau_points},
                   {"omega_min", a.omega_min},
                   {"omega_max", a.omega_max},
                   {"omega_points", a.omega_points},
                   {"peak_window", {a.peak_lo, a.peak_hi}},
                   {"rescale", {a.rescale.scale, a.rescale.offset}},
                   {"method", a.method},
                   {"sweep_axis", a.sweep_axis},
                   {"sweep_values", a.sweep_values},
                   {"state_entries", entries},
                   {"burn_in", a.burn_in},
                   {"segments", a.segments},
                   {"validate_T", a.validate_T},
                   {"validate_dt", a.validate_dt}};

  json output = {{"dir", c.output.dir}, {"formats", c.output.formats}};
  return {{"schema_version", c.schema_version}, {"system", system}, {"bath", bath},
          {"sim", sim},                         {"analysis", analysis}, {"output", output}};
}

SystemModel make_system(const ExperimentConfig& c) {
  const auto& s = c.system;
  SystemModel m = two_level_model(s.levels[0], s.levels[1], s.gamma, s.omega_c);
  if (s.bath_operator == "sigma_x") {
    m.bath_op = qubit::sigma_x();
  } else if (s.bath_operator == "identity") {
    m.bath_op = Matrix::Identity(2, 2);
  }
  m.omega_p = s.omega_p.value_or(s.omega_c - s.delta);
  m.xi_p = s.xi_p;
  m.kappa = s.kappa;
  m.eta = s.eta;
  m.phi = s.phi;
  m.delta = s.delta;
  m.alpha_override = s.alpha;
  m.dispersive_threshold = s.dispersive_threshold;
  m.resonance_floor = s.resonance_floor;
  m.validate();
  m.field = s.field ? *s.field : field_strength(m, c.bath.spec);
  return m;
}

Matrix initial_state(const ExperimentConfig& c) {
  const auto& name = c.system.initial_state;
  if (name == "plus") return qubit::plus_state();
  if (name == "ground") return qubit::projector(0);
  if (name == "excited") return qubit::projector(1);
  return Matrix::Identity(2, 2) / 2.0;
}

}  // namespace spinsme
