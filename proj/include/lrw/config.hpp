#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrw/space.hpp"

namespace lrw {

struct SpaceSpec {
  std::string kind = "lattice_l1";  // lattice_l1 | lattice_linf | finite
  int dim = 1;
  std::int64_t window_radius = 4096;
  std::vector<double> mu_pattern{1.0};
  nlohmann::json finite;  // {"sites", "mu", "dist"} when kind == finite
};

struct PhiSpec {
  double beta = 1.0;
  nlohmann::json l = {{"kind", "const"}, {"params", {1.0}}};
};

struct KernelSpec {
  double theta_diag = 0.2;
  std::optional<double> jump_radius;
  double noise_rho = 1.0;
  std::uint64_t noise_seed = 0;
};

struct HeatSpec {
  std::size_t n_max = 256;
  double eps_leak = 1e-6;
  double eps_poisson = 1e-12;
  std::vector<Site> origins{Site{}};
  double export_radius = 64.0;
  std::vector<double> t_grid{1, 2, 4, 8, 16, 32, 64};
};

struct MonteCarloSpec {
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  std::int64_t sim_radius = 65536;
  std::vector<double> exit_r{16, 32};
  double exit_t_fraction = 1.0 / 128.0;  // t = fraction * r^beta
  std::vector<Site> gamma_x{Site{}};
  std::vector<double> gamma_r{8, 16, 32};
  std::vector<double> hitting_d{64, 128, 256};
  std::size_t hitting_n = 8;
  std::size_t chi_draws = 1000000;
};

struct VerifySpec {
  double target_radius = 1024.0;
  double drift_factor = 2.0;
  std::size_t diag_n_min = 4;
  std::vector<double> harnack_R{8, 16, 32};
  std::vector<double> c2_grid{0.0625, 0.125, 0.25, 0.5, 1, 2, 4};
  double ratio_floor = 1e-2;
  std::vector<double> nash_R{1, 4, 16, 64};
  std::size_t nash_samples = 200;
  std::vector<double> poincare_r{1, 2, 4, 8};
  std::vector<double> tail_r{8, 16, 32, 64, 128};
  std::optional<double> delta;
  std::uint64_t sample_seed = 7;
};

struct ExperimentConfig {
  std::string name = "custom";
  SpaceSpec space;
  PhiSpec phi;
  KernelSpec kernel;
  HeatSpec heat;
  MonteCarloSpec montecarlo;
  VerifySpec verify;
  std::string output = "out";
  unsigned workers = 1;
};

/// Full document with every field at its default.
nlohmann::json default_config_json();

/// Defaults merged with `doc`, validated. Throws ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Shipped presets: z1-beta05, z1-beta1, z2-beta15, z1-beta1-log.
std::vector<std::string> preset_names();
nlohmann::json preset(const std::string& name);

/// Applies "a.b.c=value" to `doc`. The value is read as JSON when it parses,
/// as a string otherwise. Throws ConfigError for unknown keys.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json site_to_json(const Site& s, int dim);

}  // namespace lrw
