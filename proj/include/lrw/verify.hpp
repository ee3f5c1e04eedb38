#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrw/heat.hpp"
#include "lrw/kernel.hpp"
#include "lrw/rv.hpp"

namespace lrw {

/// Ratio extremes restricted to keys in [2^j, 2^{j+1}).
struct SliceBand {
  int j = 0;
  double low = std::numeric_limits<double>::infinity();
  double high = 0.0;
  std::size_t count = 0;
};

struct ScanPoint {
  double key = 0.0;  // n, t or R
  Site x0;
  Site y;
  double d = 0.0;
  double value = 0.0;
  double envelope = 0.0;
  double ratio = 0.0;
};

enum class BandSide { Both, Upper, Lower };

/// Measured band of value / envelope over a scan grid.
struct BoundReport {
  std::string name;
  std::string grid;
  BandSide side = BandSide::Both;
  double c_low = std::numeric_limits<double>::infinity();
  double C_up = 0.0;
  std::vector<SliceBand> slices;
  double drift_factor = 2.0;
  double max_drift = 1.0;
  std::size_t n_points = 0;
  std::size_t n_excluded = 0;
  std::vector<std::string> exclusions;  // first few, for the report
  std::vector<ScanPoint> points;
  nlohmann::json annotations = nlohmann::json::object();
  bool verdict = false;

  double band_width() const noexcept { return C_up / c_low; }
  void add(const ScanPoint& p);
  void exclude(const std::string& why);
  /// Recomputes drift and verdict from the stored bands.
  void finalize();
  nlohmann::json to_json() const;
  void write_csv(std::ostream& os, int dim) const;
};

/// Slowly varying time-scale correction l_# (x) with the argument clamped to
/// [x_min, inf); the residual of every evaluation is recorded.
class LSharp {
 public:
  explicit LSharp(SlowlyVaryingFn l, DeBruijnOptions opt = {});
  double operator()(double x) const;
  double max_residual() const noexcept { return max_residual_; }
  const SlowlyVaryingFn& l() const noexcept { return l_; }

 private:
  SlowlyVaryingFn l_;
  DeBruijnOptions opt_;
  mutable double max_residual_ = 0.0;
};

using Metric = std::function<double(const Site&, const Site&)>;

struct ScanOptions {
  double target_radius = 1024.0;  // scan y with d(x_0, y) <= target_radius
  std::size_t n_min = 1;
  std::size_t n_max = 0;  // 0: table depth
  double drift_factor = 2.0;
  double exclusion_fraction = 0.1;
  Metric metric;  // defaults to the kernel space's metric
  bool keep_points = true;
  unsigned workers = 1;
};

/// h_n(x_0, y) against min(1 / V_h(n^{1/beta} l_#(n^{1/beta})), n / (V_h(d) phi(d))).
/// Entries whose leak uncertainty exceeds exclusion_fraction of the envelope are
/// excluded. Throws EmptyScanError.
BoundReport hkp_scan(const std::vector<const HeatTable*>& tables, const RegVaryingFn& phi, const VolumeProfile& profile,
                     const LSharp& l_sharp, const ScanOptions& opt = {});

struct DiagonalDecay {
  BoundReport heat;     // h_n(x_0, x_0) V_h(n^{1/beta})
  BoundReport poisson;  // q_t(x_0, x_0) V_h(t^{1/beta})
  bool even_monotone = true;
};

/// Diagonal ratios over n in [n_min, n_max] and t on `t_grid`.
DiagonalDecay diagonal_decay(const std::vector<const HeatTable*>& tables, const VolumeProfile& profile, double beta,
                             const std::vector<double>& t_grid, const ScanOptions& opt = {}, double eps_poisson = 1e-12);

/// q_t(x_0, y) against min(1 / V_h(t^{1/beta}), t / (V_h(d) (1 + d)^beta)),
/// upper band only. Requires a pure-power phi.
BoundReport qt_bound_scan(const HeatTable& table, const std::vector<PoissonRow>& rows, const RegVaryingFn& phi,
                          const VolumeProfile& profile, const ScanOptions& opt = {});

/// Nonnegative random bumps sum_i a_i max(0, 1 - |x - c_i| / w_i) on the
/// window, centres within `spread` of the origin and widths log-uniform in
/// [1, max_width]. `signed_heights` allows negative a_i.
std::vector<std::vector<double>> random_bumps(const Window& window, std::size_t count, std::uint64_t seed, double spread = 64.0,
                                              double max_width = 64.0, bool signed_heights = false);

/// Minimal C_1 with C_2 = 1 in the Nash inequality for each (f, R); the
/// verdict requires the maximum to move by less than `stability` between
/// the first half of the samples and all samples.
BoundReport nash_check(const DirichletForm& form, const VolumeProfile& profile, const std::vector<std::vector<double>>& f_samples,
                       const std::vector<double>& R_grid, double alpha, double stability = 1.25);

/// C_P(r) = max_f ||f - f_r||^2 / (r^beta E(f)), one slice per dyadic r;
/// verdict requires consecutive per-r maxima to differ by less than `band`.
BoundReport pseudo_poincare_scan(const DirichletForm& form, const std::vector<std::vector<double>>& f_samples,
                                 const std::vector<double>& r_grid, double band = 2.0);

struct ContractionResult {
  std::size_t tests = 0;
  std::size_t failures = 0;
  double worst_ratio = 0.0;  // max E(T f) / E(f)
  bool pass() const noexcept { return failures == 0; }
};

/// E((f - t)^+ min s) <= E(f) for random levels t and caps s.
ContractionResult contraction_check(const DirichletForm& form, const std::vector<std::vector<double>>& f_samples, std::uint64_t seed);

struct NearDiagonalRow {
  double c2 = 0.0;
  double floor = 0.0;  // min ratio over the cone
  double drift = 1.0;
  bool ok = false;
};

struct NearDiagonalReport {
  std::vector<NearDiagonalRow> rows;
  double c2 = 0.0;  // largest accepted c_2, 0 when none
  BoundReport band;  // cone scan at the accepted c_2
  bool verdict = false;
  nlohmann::json to_json() const;
};

/// min h_n(x_0, y) V_h(n^{1/beta}) over d(x_0, y) <= c_2 n^{1/beta} for each
/// c_2; accepts c_2 with min ratio >= ratio_floor and slice drift < drift factor.
NearDiagonalReport near_diagonal_lower(const std::vector<const HeatTable*>& tables, const VolumeProfile& profile, double beta,
                                       const std::vector<double>& c2_grid, double ratio_floor = 1e-2, const ScanOptions& opt = {});

struct HarnackRow {
  double R = 0.0;
  std::size_t k_box = 0;  // floor(gamma R^beta)
  std::size_t n0 = 0;     // floor(8 gamma R^beta)
  std::size_t K = 0;      // floor(gamma (R/3)^beta)
  Site z;
  double max_box = 0.0;
  double min_ball = 0.0;
  double ratio = 0.0;
};

struct HarnackReport {
  double gamma = 0.0;
  double R0 = 0.0;
  std::vector<HarnackRow> rows;
  double C_H = 0.0;  // max ratio over R >= R0
  double max_drift = 1.0;
  double drift_factor = 2.0;
  double parabolicity_residual = 0.0;
  double parabolicity_tolerance = 0.0;
  bool verdict = false;
  nlohmann::json to_json() const;
};

struct HarnackOptions {
  std::vector<double> z_shifts{0.0};  // z = x_0 + round(shift R) e_1
  std::size_t parabolicity_samples = 32;
  double drift_factor = 2.0;
};

/// Harnack ratio for q(k, w) = h_{n0 - k}(x_0, w), n0 = floor(8 gamma R^beta):
/// max over Q(floor(gamma R^beta), z, R/3) of q over min of q(0, .) on
/// B(z, R/3). Throws PreconditionError, InsufficientDepthError, ZeroMinimumError.
HarnackReport harnack_scan(const std::vector<const HeatTable*>& tables, const std::vector<double>& R_list, double gamma,
                           const HarnackOptions& opt = {});

/// max |q_k - P q_{k+1}| over sampled (k, x), computed row by row.
double parabolicity_residual(const HeatTable& table, std::size_t n0, std::size_t samples);

struct GeneralPhiConfig {
  std::int64_t window_radius = 4096;
  std::size_t n_max = 256;
  double theta_diag = 0.2;
  double eps_leak = 1e-6;
  ScanOptions scan;
  int emn1_octaves = 24;
  unsigned workers = 1;
};

struct GeneralPhiReport {
  ConcaveCertificate certificate;
  double A = 0.0;
  double de_bruijn_residual = 0.0;
  double emn1_min = 0.0;
  double emn1_max = 0.0;
  std::vector<std::pair<double, double>> emn1;  // (r, V_h'(r) / V_h(r^{delta/beta} l_#(r^{delta/beta})))
  BoundReport hkp;
  std::shared_ptr<const TransitionKernel> kernel;
  bool verdict = false;
  nlohmann::json to_json() const;
};

/// concave_regularize, transform_space, kernel on the transformed space with
/// exponent delta, heat table from the origin, hkp_scan against the general
/// envelope in the original metric, and the volume comparison on a dyadic grid.
GeneralPhiReport general_phi_pipeline(std::shared_ptr<const MetricMeasureSpace> space, const SlowlyVaryingFn& l, double beta,
                                      double delta, const GeneralPhiConfig& cfg);

}  // namespace lrw
