#pragma once

#include <cstddef>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrw/kernel.hpp"

namespace lrw {

/// Rows h_n(x_0, .) for n = 0..depth over the kernel's window, with the
/// cumulative lost mass lambda_n = 1 - sum_y h_n(x_0, y) mu_y (running max).
class HeatTable {
 public:
  HeatTable(std::shared_ptr<const TransitionKernel> kernel, const Site& origin, double eps_leak = 1e-6);

  /// Appends `steps` rows through h_{n+1} = P h_n. Throws LeakBudgetError.
  void evolve(std::size_t steps, unsigned workers = 1);

  const TransitionKernel& kernel() const noexcept { return *kernel_; }
  std::shared_ptr<const TransitionKernel> kernel_ptr() const noexcept { return kernel_; }
  const Site& origin() const noexcept { return origin_; }
  std::size_t origin_index() const noexcept { return origin_idx_; }
  std::size_t depth() const noexcept { return rows_.size() - 1; }
  const std::vector<double>& row(std::size_t n) const { return rows_.at(n); }
  double value(std::size_t n, std::size_t y) const { return rows_.at(n).at(y); }
  double leak(std::size_t n) const { return leak_.at(n); }
  double max_leak() const noexcept { return leak_.back(); }
  double eps_leak() const noexcept { return eps_leak_; }
  double max_value(std::size_t n) const;

 private:
  std::shared_ptr<const TransitionKernel> kernel_;
  Site origin_;
  std::size_t origin_idx_ = 0;
  double eps_leak_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> leak_;
};

inline void evolve(HeatTable& table, std::size_t steps, unsigned workers = 1) { table.evolve(steps, workers); }

struct ChapmanResult {
  double residual = 0.0;
  double bound = 0.0;
  bool within() const noexcept { return residual <= bound; }
};

/// |h_{n+m}(x_0, y_0) - sum_z h_n(x_0, z) h_m(z, y_0) mu_z| with a
/// leak-aware bound.
ChapmanResult chapman_check(const HeatTable& a, const HeatTable& b, std::size_t n, std::size_t m);

struct PoissonRow {
  double t = 0.0;
  std::vector<double> values;
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  double tail_bound = 0.0;
};

/// Poisson(t) probabilities for k in [k_min, k_max], from the mode outwards.
std::vector<double> poisson_weights(double t, std::size_t k_min, std::size_t k_max);
/// Smallest window [k_min, k_max] around t whose Chernoff tails sum to <= eps.
std::pair<std::size_t, std::size_t> poisson_range(double t, double eps);

/// q_t(x_0, .) = sum_k e^{-t} t^k / k! h_k(x_0, .), truncated. Throws
/// InsufficientDepthError when the table is shallower than k_max.
PoissonRow poissonize(const HeatTable& table, double t, double eps_poisson = 1e-12);

struct DiagonalProfile {
  std::vector<std::pair<std::size_t, double>> points;  // (n, h_n(x_0, x_0))
  std::vector<std::size_t> violations;                  // even n with h_{n+2} above h_n + slack
  double slack = 0.0;
  bool pass() const noexcept { return violations.empty(); }
};

DiagonalProfile diagonal_profile(const HeatTable& table);

struct TailSums {
  double S1 = 0.0;
  double S2 = 0.0;
  double remainder_bound = 0.0;  // window complement part of S1
  double C1 = 0.0;
  double C2 = 0.0;
  double bound1 = 0.0;  // C1 r^-beta
  double bound2 = 0.0;  // C2 r^{2-beta}
};

/// S1 = sum over window sites outside B(x, r) of mu_y / (V_h(d) d^beta),
/// S2 = sum over B(x, r) \ {x} of d^{2-beta} mu_y / V_h(d). Throws
/// WindowTooSmallError when the complement remainder is >= 10% of S1.
TailSums tail_sums(const MetricMeasureSpace& space, const Window& window, const Site& x, double r, double beta);

void write_heat_csv(const HeatTable& table, std::ostream& os, double export_radius);
void write_poisson_csv(const HeatTable& table, const std::vector<PoissonRow>& rows, std::ostream& os, double export_radius);

}  // namespace lrw
