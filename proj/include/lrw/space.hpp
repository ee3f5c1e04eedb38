#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace lrw {

inline constexpr int kMaxDim = 3;

/// A point of a uniformly discrete space. Lattice sites use the first
/// `dimension` coordinates; sites of explicit finite spaces carry their index
/// in c[0].
struct Site {
  std::array<std::int64_t, kMaxDim> c{};

  static Site index(std::int64_t i) { return Site{{i, 0, 0}}; }
  static Site at(std::int64_t x0, std::int64_t x1 = 0, std::int64_t x2 = 0) {
    return Site{{x0, x1, x2}};
  }

  auto operator<=>(const Site&) const = default;
};

std::string to_string(const Site& s, int dim);

enum class MetricKind { LatticeL1, LatticeLinf, ExplicitFinite, Transformed };

std::string to_string(MetricKind kind);

/// Homogeneous volume profile V_h together with its declared constants.
struct VolumeProfile {
  std::function<double(double)> fn;
  double doubling_constant = 1.0;     // C_D
  double homogeneity_constant = 1.0;  // C_h
  double alpha = 0.0;                 // exponent in the polynomial comparison
  std::string description;

  double operator()(double r) const { return fn(r); }

  /// (1 + 2r)^d for L-infinity lattices, (1 + 2r)^d / d! for L1 lattices.
  static VolumeProfile lattice_default(MetricKind kind, int dim);
};

/// Strictly increasing map with g(0) = 0 used to change a metric.
class MetricTransform {
 public:
  virtual ~MetricTransform() = default;
  virtual double value(double x) const = 0;
  virtual double inverse(double y) const = 0;
};

/// Uniformly discrete metric measure space: integer lattices with an L1 or
/// L-infinity metric, explicit finite spaces, or a base space whose metric is
/// composed with a concave transform.
///
/// Instances are immutable once constructed.
class MetricMeasureSpace {
 public:
  /// Lattice Z^dim. `mu_pattern` assigns mu_x = pattern[(sum of coords) mod size].
  static MetricMeasureSpace lattice(MetricKind kind, int dim, std::vector<double> mu_pattern = {1.0});

  /// Explicit finite space. Throws ConfigError when `dist` is not a metric or
  /// two distinct sites are at distance 0. Without a profile, the measured
  /// profile V_h(r) = max_x V(x, r) is used.
  static MetricMeasureSpace finite(std::vector<std::string> labels, std::vector<double> mu,
                                   std::vector<std::vector<double>> dist,
                                   std::optional<VolumeProfile> profile = std::nullopt);

  /// {"sites": [...], "mu": [...], "dist": [[...], ...]}
  static MetricMeasureSpace from_json(const nlohmann::json& doc);

  /// d'(x, y) = g(d(x, y)), same measure, V_h' = V_h o g^{-1}.
  static MetricMeasureSpace transformed(std::shared_ptr<const MetricMeasureSpace> base,
                                        std::shared_ptr<const MetricTransform> g);

  MetricKind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return dim_; }
  /// Lattice, or a transform whose (recursive) base is a lattice.
  bool lattice_like() const noexcept;
  /// Lattice-like with a constant site measure: V(x, r) does not depend on x.
  bool homogeneous() const noexcept;

  void validate_site(const Site& x) const;
  double distance(const Site& x, const Site& y) const;
  double measure(const Site& x) const;
  std::vector<Site> ball(const Site& x, double r) const;
  double volume(const Site& x, double r) const;

  double discreteness_gap() const noexcept { return gap_; }
  double comparability_constant() const noexcept { return c_mu_; }
  const VolumeProfile& profile() const noexcept { return profile_; }
  MetricMeasureSpace with_profile(VolumeProfile profile) const;

  std::size_t site_budget() const noexcept { return site_budget_; }
  MetricMeasureSpace with_site_budget(std::size_t budget) const;

  /// Number of sites of an explicit finite space (0 for infinite kinds).
  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<double>& mu_pattern() const noexcept { return mu_pattern_; }

  const MetricMeasureSpace* base() const noexcept { return base_.get(); }
  const MetricTransform* transform() const noexcept { return transform_.get(); }

  /// Largest integer k >= 0 with g(k) <= r, for transforms of integer-valued
  /// base metrics.
  std::int64_t transformed_integer_radius(double r) const;

 private:
  MetricMeasureSpace() = default;

  std::vector<Site> lattice_ball(const Site& x, double r) const;
  double lattice_volume(const Site& x, double r) const;
  void check_budget(double count) const;

  MetricKind kind_ = MetricKind::LatticeL1;
  int dim_ = 1;
  std::vector<double> mu_pattern_{1.0};
  std::vector<std::string> labels_;
  std::vector<double> mu_;
  std::vector<std::vector<double>> dist_;
  std::shared_ptr<const MetricMeasureSpace> base_;
  std::shared_ptr<const MetricTransform> transform_;
  double gap_ = 1.0;
  double c_mu_ = 1.0;
  VolumeProfile profile_;
  std::size_t site_budget_ = 50'000'000;
};

/// Finite truncation of a space on which kernels and heat tables live. For
/// lattice-like spaces this is the box [-R, R]^dim around the origin, sites in
/// lexicographic order; for finite spaces it is every site in index order.
class Window {
 public:
  static Window box(int dim, std::int64_t radius);
  static Window all(std::size_t n);
  static Window for_space(const MetricMeasureSpace& space, std::int64_t radius);

  std::size_t size() const noexcept { return sites_.size(); }
  const Site& site(std::size_t i) const { return sites_[i]; }
  const std::vector<Site>& sites() const noexcept { return sites_; }
  std::optional<std::size_t> index_of(const Site& s) const;
  bool contains(const Site& s) const { return index_of(s).has_value(); }

  bool is_box() const noexcept { return is_box_; }
  int dim() const noexcept { return dim_; }
  std::int64_t radius() const noexcept { return radius_; }
  std::size_t extent() const noexcept { return static_cast<std::size_t>(2 * radius_ + 1); }

 private:
  bool is_box_ = false;
  int dim_ = 1;
  std::int64_t radius_ = 0;
  std::vector<Site> sites_;
};

struct SpaceAuditReport {
  double gap_hat = 0.0;          // min pairwise distance among distinct samples
  double c_mu_hat = 1.0;         // max of max(mu_x, 1 / mu_x)
  double c_doubling_hat = 1.0;   // max V_h(2r) / V_h(r) on the grid
  double c_homog_hat = 1.0;      // max of max(V / V_h, V_h / V)
  double vc_ratio_hat = 0.0;     // max V_h(R) / (V_h(r) C_D (R/r)^alpha), should be <= 1
  bool profile_monotone = true;
  bool volume_monotone = true;
  bool metric_axioms = true;
  std::size_t triples_checked = 0;
  std::vector<std::string> failures;
  bool pass() const noexcept { return failures.empty(); }
};

/// Empirical check of the standing assumptions against the declared constants.
/// A constant exceeding its declared value by more than 1e-9 relative fails.
SpaceAuditReport audit_space(const MetricMeasureSpace& space, const std::vector<Site>& x_samples,
                             const std::vector<double>& r_grid);

nlohmann::json to_json(const SpaceAuditReport& report);

}  // namespace lrw
