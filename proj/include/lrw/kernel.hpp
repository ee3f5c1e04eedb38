#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrw/rv.hpp"
#include "lrw/space.hpp"

namespace lrw {

struct KernelOptions {
  double theta_diag = 0.2;
  std::optional<double> jump_radius;  // R_J; defaults to the window radius (metric units)
  double tail_warning_fraction = 0.05;
  double noise_rho = 1.0;  // > 1 enables the multiplicative noise mode
  std::uint64_t noise_seed = 0;
  std::size_t dense_limit = 4096;
  unsigned workers = 1;
};

struct KernelCertificate {
  double ratio_min = 0.0;  // min over stored pairs of J V_h(d) phi(d)
  double ratio_max = 0.0;
  double certified_c1 = 0.0;
  double min_diagonal = 0.0;  // min_x p(x, x)
  double kappa = 0.0;         // min_x h_1(x, x)
  double max_row_error = 0.0;
  double max_reversibility_error = 0.0;
  double tail_bound = 0.0;     // estimated off-diagonal mass beyond R_J
  double tail_fraction = 0.0;  // relative to the largest row
  bool truncation_warning = false;
  std::size_t pairs_checked = 0;
};

/// One-step kernel p on a window, J = h_1 = p(x, y) / mu_y proportional to
/// 1 / (V_h(d) phi(d)), slack on the diagonal.
///
/// Lattice-like spaces without noise store a displacement stencil and apply P
/// by direct convolution; other spaces store the dense matrix.
class TransitionKernel {
 public:
  enum class Mode { Stencil, Dense };

  static std::shared_ptr<const TransitionKernel> build(std::shared_ptr<const MetricMeasureSpace> space,
                                                       const Window& window, const RegVaryingFn& phi,
                                                       const KernelOptions& opt = {});

  const MetricMeasureSpace& space() const noexcept { return *space_; }
  std::shared_ptr<const MetricMeasureSpace> space_ptr() const noexcept { return space_; }
  const Window& window() const noexcept { return window_; }
  const RegVaryingFn& phi() const noexcept { return phi_; }
  Mode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return window_.size(); }
  double offdiag_scale() const noexcept { return s_; }
  double jump_radius() const noexcept { return jump_radius_; }
  double theta_diag() const noexcept { return theta_; }
  const KernelCertificate& certificate() const noexcept { return cert_; }
  const std::vector<double>& diagonal() const noexcept { return diag_; }
  const std::vector<double>& mu() const noexcept { return mu_; }
  bool noisy() const noexcept { return noise_rho_ > 1.0; }

  /// p(x, y) for window indices.
  double p(std::size_t x, std::size_t y) const;
  /// J(x, y) = p(x, y) / mu_y.
  double J(std::size_t x, std::size_t y) const { return p(x, y) / mu_[y]; }
  /// Target weight 1 / (V_h(d) phi(d)) for d > 0.
  double target(double d) const;
  /// Off-diagonal entries of row x in window order, diagonal included.
  std::vector<std::pair<std::size_t, double>> row(std::size_t x) const;

  /// (Pf)(x) = sum_y p(x, y) f(y). Summation order per x is fixed.
  std::vector<double> apply(const std::vector<double>& f, unsigned workers = 1) const;

  /// Stencil mode: unscaled kernel K(v) = 1 / (V_h(d) phi(d)) on the
  /// displacement box [-D, D]^dim, zero at v = 0 and beyond R_J.
  const std::vector<double>& stencil() const noexcept { return stencil_; }
  std::int64_t stencil_radius() const noexcept { return stencil_radius_; }

  nlohmann::json metadata() const;

 private:
  TransitionKernel() = default;

  void build_stencil(unsigned workers);
  void build_dense(unsigned workers);
  void certify(double unscaled_max_row);
  double noise_factor(std::size_t x, std::size_t y) const;
  void convolve(const std::vector<double>& src, std::vector<double>& out, unsigned workers) const;
  void convolve_compensated(const std::vector<double>& src, std::vector<double>& hi, std::vector<double>& lo,
                            unsigned workers) const;

  std::shared_ptr<const MetricMeasureSpace> space_;
  Window window_;
  RegVaryingFn phi_ = RegVaryingFn::pure_power(1.0);
  Mode mode_ = Mode::Dense;
  double theta_ = 0.2;
  double s_ = 0.0;
  double jump_radius_ = 0.0;
  double tail_warning_fraction_ = 0.05;
  double noise_rho_ = 1.0;
  std::uint64_t noise_seed_ = 0;
  std::vector<double> mu_;
  std::vector<double> diag_;
  std::vector<double> sm_;  // s * mu
  std::vector<double> stencil_;  // unscaled, stencil mode
  std::int64_t stencil_radius_ = 0;
  std::vector<double> dense_;  // unscaled symmetric weights, row-major, dense mode
  KernelCertificate cert_;
};

/// E(f, f) of the kernel's Dirichlet form.
class DirichletForm {
 public:
  explicit DirichletForm(std::shared_ptr<const TransitionKernel> kernel) : k_(std::move(kernel)) {}

  /// (1/2) sum (f(x) - f(y))^2 J(x, y) mu_x mu_y, restricted to the support
  /// of f plus a complement term.
  double energy(const std::vector<double>& f) const;
  /// <(I - P) f, f>_mu
  double quadratic_form(const std::vector<double>& f, unsigned workers = 1) const;
  const TransitionKernel& kernel() const noexcept { return *k_; }

 private:
  std::shared_ptr<const TransitionKernel> k_;
};

inline double dirichlet_energy(const DirichletForm& form, const std::vector<double>& f) { return form.energy(f); }

/// (sum_{x != y} |f(x) - f(y)|^2 / (d^beta V(x, d)) mu_x mu_y)^{1/2} over the window.
double besov_seminorm(const TransitionKernel& kernel, const std::vector<double>& f, double beta);

struct LocalAverage {
  std::vector<double> values;
  std::size_t truncated_sites = 0;  // balls clipped by the window
};

/// f_r(x) = mu(B(x, r) cap W)^{-1} sum_{y in B(x, r) cap W} f(y) mu_y.
LocalAverage local_average(const MetricMeasureSpace& space, const Window& window, const std::vector<double>& f, double r);

/// Inner product and norms in l^p(window, mu).
double inner(const std::vector<double>& f, const std::vector<double>& g, const std::vector<double>& mu);
double norm1(const std::vector<double>& f, const std::vector<double>& mu);
double norm2(const std::vector<double>& f, const std::vector<double>& mu);

/// Writes CSV triplets x,y,p in window order (dense) or the stencil
/// displacement,p together with the diagonal (stencil).
void write_kernel_csv(const TransitionKernel& kernel, std::ostream& os);

}  // namespace lrw
