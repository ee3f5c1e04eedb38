#include "lrw/config.hpp"

#include <algorithm>
#include <cmath>

#include "lrw/error.hpp"
#include "lrw/rv.hpp"

namespace lrw {

namespace {

using nlohmann::json;

// fields replaced wholesale rather than merged key by key
bool replace_leaf(const std::string& path) {
  return path == "space.finite" || path == "phi.l" || path == "kernel.jump_radius" || path == "verify.delta";
}

void merge_into(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown field '" + path + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && !replace_leaf(path)) {
      merge_into(slot, it.value(), path);
    } else {
      slot = it.value();
    }
  }
}

template <class T>
T get(const json& doc, const std::string& path) {
  const json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("missing field '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + path + "' has the wrong type: " + std::string(e.what()));
  }
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("field '" + field + "': " + why);
}

template <class T>
std::string show(const T& v) {
  return json(v).dump();
}

std::vector<Site> parse_sites(const json& doc, const std::string& path) {
  const auto raw = get<std::vector<std::vector<std::int64_t>>>(doc, path);
  std::vector<Site> out;
  for (const auto& v : raw) {
    require(!v.empty() && v.size() <= static_cast<std::size_t>(kMaxDim), path, "each site needs 1 to 3 coordinates");
    Site s;
    for (std::size_t i = 0; i < v.size(); ++i) s.c[i] = v[i];
    out.push_back(s);
  }
  return out;
}

void require_grid(const std::vector<double>& g, const std::string& path, bool allow_zero = false) {
  require(!g.empty(), path, "grid must be nonempty");
  for (double v : g) require(std::isfinite(v) && (allow_zero ? v >= 0.0 : v > 0.0), path, "grid values must be positive, got " + show(v));
}

json sites_json(const std::vector<Site>& sites, int dim) {
  json a = json::array();
  for (const auto& s : sites) a.push_back(site_to_json(s, dim));
  return a;
}

}  // namespace

json site_to_json(const Site& s, int dim) {
  json a = json::array();
  for (int i = 0; i < std::max(dim, 1); ++i) a.push_back(s.c[static_cast<std::size_t>(i)]);
  return a;
}

json default_config_json() { return to_json(ExperimentConfig{}); }

ExperimentConfig parse_config(const json& doc) {
  json merged = default_config_json();
  merge_into(merged, doc, "");
  ExperimentConfig c;
  c.name = get<std::string>(merged, "name");
  c.output = get<std::string>(merged, "output");
  c.workers = get<unsigned>(merged, "workers");
  require(c.workers >= 1, "workers", "must be >= 1");

  auto& sp = c.space;
  sp.kind = get<std::string>(merged, "space.kind");
  require(sp.kind == "lattice_l1" || sp.kind == "lattice_linf" || sp.kind == "finite", "space.kind",
          "must be one of lattice_l1, lattice_linf, finite; got " + show(sp.kind));
  sp.dim = get<int>(merged, "space.dim");
  require(sp.dim >= 1 && sp.dim <= kMaxDim, "space.dim", "must lie in [1, 3], got " + show(sp.dim));
  sp.window_radius = get<std::int64_t>(merged, "space.window_radius");
  require(sp.window_radius >= 1, "space.window_radius", "must be >= 1");
  sp.mu_pattern = get<std::vector<double>>(merged, "space.mu_pattern");
  require_grid(sp.mu_pattern, "space.mu_pattern");
  sp.finite = merged["space"]["finite"];
  if (sp.kind == "finite") require(sp.finite.is_object(), "space.finite", "required when space.kind is finite");

  c.phi.beta = get<double>(merged, "phi.beta");
  require(c.phi.beta > 0.0 && c.phi.beta < 2.0, "phi.beta", "beta must lie in (0,2), got " + show(c.phi.beta));
  c.phi.l = merged["phi"]["l"];
  try {
    (void)SlowlyVaryingFn::from_json(c.phi.l);
  } catch (const Error& e) {
    throw ConfigError("field 'phi.l': " + std::string(e.what()));
  }

  auto& k = c.kernel;
  k.theta_diag = get<double>(merged, "kernel.theta_diag");
  require(k.theta_diag > 0.0 && k.theta_diag < 1.0, "kernel.theta_diag", "theta_diag must lie in (0,1), got " + show(k.theta_diag));
  if (!merged["kernel"]["jump_radius"].is_null()) {
    k.jump_radius = get<double>(merged, "kernel.jump_radius");
    require(*k.jump_radius > 0.0, "kernel.jump_radius", "must be positive");
  }
  k.noise_rho = get<double>(merged, "kernel.noise_rho");
  require(k.noise_rho >= 1.0, "kernel.noise_rho", "must be >= 1");
  k.noise_seed = get<std::uint64_t>(merged, "kernel.noise_seed");

  auto& h = c.heat;
  h.n_max = get<std::size_t>(merged, "heat.n_max");
  require(h.n_max >= 2, "heat.n_max", "must be >= 2");
  h.eps_leak = get<double>(merged, "heat.eps_leak");
  require(h.eps_leak > 0.0, "heat.eps_leak", "must be positive");
  h.eps_poisson = get<double>(merged, "heat.eps_poisson");
  require(h.eps_poisson > 0.0 && h.eps_poisson < 1.0, "heat.eps_poisson", "must lie in (0,1)");
  h.origins = parse_sites(merged, "heat.origins");
  require(!h.origins.empty(), "heat.origins", "must be nonempty");
  h.export_radius = get<double>(merged, "heat.export_radius");
  require(h.export_radius >= 0.0, "heat.export_radius", "must be >= 0");
  h.t_grid = get<std::vector<double>>(merged, "heat.t_grid");
  require_grid(h.t_grid, "heat.t_grid", true);

  auto& m = c.montecarlo;
  m.n_paths = get<std::size_t>(merged, "montecarlo.n_paths");
  require(m.n_paths >= 100, "montecarlo.n_paths", "must be >= 100");
  m.seed = get<std::uint64_t>(merged, "montecarlo.seed");
  m.sim_radius = get<std::int64_t>(merged, "montecarlo.sim_radius");
  require(m.sim_radius >= 1, "montecarlo.sim_radius", "must be >= 1");
  m.exit_r = get<std::vector<double>>(merged, "montecarlo.exit_r");
  require_grid(m.exit_r, "montecarlo.exit_r");
  m.exit_t_fraction = get<double>(merged, "montecarlo.exit_t_fraction");
  require(m.exit_t_fraction > 0.0, "montecarlo.exit_t_fraction", "must be positive");
  m.gamma_x = parse_sites(merged, "montecarlo.gamma_x");
  require(!m.gamma_x.empty(), "montecarlo.gamma_x", "must be nonempty");
  m.gamma_r = get<std::vector<double>>(merged, "montecarlo.gamma_r");
  require_grid(m.gamma_r, "montecarlo.gamma_r");
  m.hitting_d = get<std::vector<double>>(merged, "montecarlo.hitting_d");
  require_grid(m.hitting_d, "montecarlo.hitting_d");
  m.hitting_n = get<std::size_t>(merged, "montecarlo.hitting_n");
  require(m.hitting_n >= 1, "montecarlo.hitting_n", "must be >= 1");
  m.chi_draws = get<std::size_t>(merged, "montecarlo.chi_draws");
  require(m.chi_draws >= 1, "montecarlo.chi_draws", "must be >= 1");

  auto& v = c.verify;
  v.target_radius = get<double>(merged, "verify.target_radius");
  require(v.target_radius > 0.0, "verify.target_radius", "must be positive");
  v.drift_factor = get<double>(merged, "verify.drift_factor");
  require(v.drift_factor > 1.0, "verify.drift_factor", "must exceed 1");
  v.diag_n_min = get<std::size_t>(merged, "verify.diag_n_min");
  require(v.diag_n_min >= 1 && v.diag_n_min <= h.n_max, "verify.diag_n_min", "must lie in [1, heat.n_max]");
  v.harnack_R = get<std::vector<double>>(merged, "verify.harnack_R");
  require_grid(v.harnack_R, "verify.harnack_R");
  v.c2_grid = get<std::vector<double>>(merged, "verify.c2_grid");
  require_grid(v.c2_grid, "verify.c2_grid");
  v.ratio_floor = get<double>(merged, "verify.ratio_floor");
  require(v.ratio_floor > 0.0, "verify.ratio_floor", "must be positive");
  v.nash_R = get<std::vector<double>>(merged, "verify.nash_R");
  require_grid(v.nash_R, "verify.nash_R");
  v.nash_samples = get<std::size_t>(merged, "verify.nash_samples");
  require(v.nash_samples >= 2, "verify.nash_samples", "must be >= 2");
  v.poincare_r = get<std::vector<double>>(merged, "verify.poincare_r");
  require_grid(v.poincare_r, "verify.poincare_r");
  v.tail_r = get<std::vector<double>>(merged, "verify.tail_r");
  require_grid(v.tail_r, "verify.tail_r");
  if (!merged["verify"]["delta"].is_null()) {
    v.delta = get<double>(merged, "verify.delta");
    require(*v.delta > c.phi.beta && *v.delta < 2.0, "verify.delta", "delta must lie in (beta,2), got " + show(*v.delta));
  }
  v.sample_seed = get<std::uint64_t>(merged, "verify.sample_seed");
  return c;
}

json to_json(const ExperimentConfig& c) {
  const int dim = c.space.dim;
  json j;
  j["name"] = c.name;
  j["output"] = c.output;
  j["workers"] = c.workers;
  j["space"] = {{"kind", c.space.kind},
                {"dim", c.space.dim},
                {"window_radius", c.space.window_radius},
                {"mu_pattern", c.space.mu_pattern},
                {"finite", c.space.finite}};
  j["phi"] = {{"beta", c.phi.beta}, {"l", c.phi.l}};
  j["kernel"] = {{"theta_diag", c.kernel.theta_diag},
                 {"jump_radius", c.kernel.jump_radius ? json(*c.kernel.jump_radius) : json(nullptr)},
                 {"noise_rho", c.kernel.noise_rho},
                 {"noise_seed", c.kernel.noise_seed}};
  j["heat"] = {{"n_max", c.heat.n_max},
               {"eps_leak", c.heat.eps_leak},
               {"eps_poisson", c.heat.eps_poisson},
               {"origins", sites_json(c.heat.origins, dim)},
               {"export_radius", c.heat.export_radius},
               {"t_grid", c.heat.t_grid}};
  const auto& m = c.montecarlo;
  j["montecarlo"] = {{"n_paths", m.n_paths},
                     {"seed", m.seed},
                     {"sim_radius", m.sim_radius},
                     {"exit_r", m.exit_r},
                     {"exit_t_fraction", m.exit_t_fraction},
                     {"gamma_x", sites_json(m.gamma_x, dim)},
                     {"gamma_r", m.gamma_r},
                     {"hitting_d", m.hitting_d},
                     {"hitting_n", m.hitting_n},
                     {"chi_draws", m.chi_draws}};
  const auto& v = c.verify;
  j["verify"] = {{"target_radius", v.target_radius},
                 {"drift_factor", v.drift_factor},
                 {"diag_n_min", v.diag_n_min},
                 {"harnack_R", v.harnack_R},
                 {"c2_grid", v.c2_grid},
                 {"ratio_floor", v.ratio_floor},
                 {"nash_R", v.nash_R},
                 {"nash_samples", v.nash_samples},
                 {"poincare_r", v.poincare_r},
                 {"tail_r", v.tail_r},
                 {"delta", v.delta ? json(*v.delta) : json(nullptr)},
                 {"sample_seed", v.sample_seed}};
  return j;
}

std::vector<std::string> preset_names() { return {"z1-beta05", "z1-beta1", "z2-beta15", "z1-beta1-log"}; }

json preset(const std::string& name) {
  if (name == "z1-beta1") return json::parse(R"({"name": "z1-beta1"})");
  if (name == "z1-beta1-log")
    return json::parse(R"({"name": "z1-beta1-log",
      "phi": {"beta": 1.0, "l": {"kind": "logpow", "params": [1.0]}},
      "verify": {"delta": 1.5}})");
  if (name == "z1-beta05")
    return json::parse(R"({"name": "z1-beta05",
      "phi": {"beta": 0.5},
      "heat": {"n_max": 24, "t_grid": [1, 2]},
      "montecarlo": {"exit_r": [16, 32], "gamma_r": [16, 64, 256], "hitting_d": [256, 512, 1024]},
      "verify": {"harnack_R": [16, 64, 256], "tail_r": [1, 2, 4, 8]}})");
  if (name == "z2-beta15")
    return json::parse(R"({"name": "z2-beta15",
      "space": {"kind": "lattice_linf", "dim": 2, "window_radius": 64},
      "phi": {"beta": 1.5},
      "heat": {"n_max": 88, "t_grid": [8, 16, 32], "origins": [[0, 0]], "export_radius": 16},
      "montecarlo": {"exit_r": [8], "gamma_x": [[0, 0]], "gamma_r": [4, 8, 16], "hitting_d": [16, 32, 64]},
      "verify": {"target_radius": 32, "harnack_R": [4, 8, 16], "nash_R": [1, 2, 4, 8], "poincare_r": [1, 2, 4], "tail_r": [1, 2, 4]}})");
  throw ConfigError("unknown preset '" + name + "'");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must have the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  // build {"a": {"b": value}} and merge against the defaults to reject unknown keys
  json patch = value;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  json probe = default_config_json();
  merge_into(probe, patch, "");
  json* node = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

}  // namespace lrw
