#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "lrw/kernel.hpp"
#include "lrw/numeric.hpp"
#include "lrw/rng.hpp"

namespace lrw {

/// Walker/Vose alias table.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);

  std::size_t sample(double u1, double u2) const noexcept {
    auto i = static_cast<std::size_t>(u1 * static_cast<double>(prob_.size()));
    if (i >= prob_.size()) i = prob_.size() - 1;
    return u2 < prob_[i] ? i : alias_[i];
  }
  std::size_t size() const noexcept { return prob_.size(); }
  /// Probabilities implied by the table.
  std::vector<double> reconstruct() const;

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

/// Jump sampler for a kernel. Translation-invariant lattice kernels whose
/// stencil fits in the window share one displacement table and can be run on
/// a simulation box larger than the kernel window; other kernels get one
/// table per window row.
class SamplerTable {
 public:
  /// `sim_radius` (shared mode only) sets the box outside which paths are
  /// censored; it defaults to the kernel window radius.
  explicit SamplerTable(std::shared_ptr<const TransitionKernel> kernel, std::optional<std::int64_t> sim_radius = std::nullopt,
                        std::size_t per_row_limit = 4096);

  bool shared() const noexcept { return shared_; }
  const TransitionKernel& kernel() const noexcept { return *kernel_; }
  std::int64_t sim_radius() const noexcept { return sim_radius_; }
  bool inside(const Site& s) const noexcept;

  /// Next position, or nullopt when the jump leaves the simulation domain.
  std::optional<Site> sample(const Site& x, PathRng& rng) const;

  /// Outcome-level access: draw an outcome index at x, map it to a site, and
  /// list the kernel probabilities of all outcomes at x.
  std::size_t draw(const Site& x, PathRng& rng) const;
  Site outcome(const Site& x, std::size_t idx) const;
  std::vector<double> outcome_probabilities(const Site& x) const;

  /// Probability of y given x implied by the tables.
  double reconstructed(const Site& x, const Site& y) const;

 private:
  std::shared_ptr<const TransitionKernel> kernel_;
  bool shared_ = false;
  std::int64_t sim_radius_ = 0;
  AliasTable table_;
  std::vector<Site> displacements_;  // last entry is the zero displacement
  std::vector<AliasTable> rows_;
  std::vector<std::vector<std::size_t>> row_targets_;
};

inline std::optional<Site> sample_jump(const SamplerTable& sampler, const Site& x, PathRng& rng) { return sampler.sample(x, rng); }

/// Poisson(t) sampling by inversion of one uniform, so N(t) is monotone in t
/// for a fixed draw.
class PoissonSampler {
 public:
  explicit PoissonSampler(double t);
  std::uint64_t operator()(double u) const;

 private:
  std::size_t k_min_ = 0;
  std::vector<double> cdf_;
};

struct ExitStats {
  Site x;
  double radius = 0.0;  // r, or d(x, y) for hitting
  double horizon = 0.0;  // t_steps, t, or n
  std::size_t n_paths = 0;
  std::size_t n_exited = 0;  // successes
  std::size_t n_censored = 0;
  double estimate = 0.0;
  Interval ci;
  double half_width = 0.0;
  double envelope = 0.0;  // hitting only
  double envelope_ratio = 0.0;
  double censored_fraction() const noexcept { return n_paths ? static_cast<double>(n_censored) / static_cast<double>(n_paths) : 0.0; }
};

enum class TimeMode { Discrete, Continuous };

struct McOptions {
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

/// P(max_{k <= horizon} d(X_k, x) > r) for the discrete chain, or for
/// Y_t = X_{N(t)} in continuous mode. Throws CensoredPathsError.
ExitStats exit_probability(const SamplerTable& sampler, const Site& x, double r, double horizon, TimeMode mode,
                           const McOptions& opt);

struct GammaRow {
  Site x;
  double r = 0.0;
  double gamma = 0.0;
  std::size_t steps = 0;
  double p_hat = 0.0;
  Interval ci;
};

struct GammaEstimate {
  double gamma = 0.0;
  std::vector<double> gamma_grid;
  std::vector<GammaRow> table;
};

/// Largest gamma in 2^-10 .. 2^2 with Wilson upper bound of
/// P(max_{k <= floor(gamma r^beta)} d(X_k, x) > r / 2) at most 1/4 for every
/// sampled (x, r). Throws NoFeasibleGammaError.
GammaEstimate estimate_gamma(const SamplerTable& sampler, const std::vector<Site>& x_samples, const std::vector<double>& r_grid,
                             const McOptions& opt);

/// P^x(T_X(y, n^{1/beta}) <= n) with the ratio to
/// n V_h(n^{1/beta}) / (V_h(d) (1 + d)^beta). Throws CensoredPathsError.
ExitStats hitting_probability(const SamplerTable& sampler, const Site& x, const Site& y, std::size_t n, const McOptions& opt);

/// Empirical one-step distribution from `draws` samples at x versus the
/// kernel row: chi-square statistic, degrees of freedom and p-value.
struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 0.0;
};
ChiSquare one_step_chi_square(const SamplerTable& sampler, const Site& x, std::size_t draws, std::uint64_t seed);

void write_stats_csv(const std::vector<ExitStats>& rows, std::ostream& os, int dim);
nlohmann::json to_json(const GammaEstimate& g, int dim);

}  // namespace lrw
